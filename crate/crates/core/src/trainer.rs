//! Stochastic reconfiguration (SR).
//!
//! Each step estimates the covariance `S_{kk′} = ⟨Oₖ Oₖ′⟩ - ⟨Oₖ⟩⟨Oₖ′⟩` of the
//! log-derivatives and the force `Fₖ = ⟨E_loc Oₖ⟩ - ⟨E_loc⟩⟨Oₖ⟩`, then moves
//! `W ← W - η (S + λI)⁻¹ F`. Both moments are formed from centered samples in
//! a second pass over the same ensemble.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ansatz::{Activation, AnsatzError, AnsatzParams};
use crate::model::ModelSpec;
use crate::observables::{local_energy, relative_energy_error, ObservableError};
use crate::sampler::{Ensemble, EstimatedValue, SamplerConfig};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrainError {
    #[error("invalid trainer setting `{field}`: {reason}")]
    InvalidConfig { field: &'static str, reason: String },
    #[error(transparent)]
    Observable(#[from] ObservableError),
    #[error(transparent)]
    Ansatz(#[from] AnsatzError),
    #[error("parameter count {params} does not match K = {expected}")]
    Dimension { params: usize, expected: usize },
    #[error("training diverged at iteration {iteration}: {reason}")]
    Diverged {
        iteration: usize,
        reason: String,
        /// Records and parameters up to the last finite iteration.
        partial: Box<TrainRun>,
    },
}

impl From<crate::sampler::SamplerError> for TrainError {
    fn from(e: crate::sampler::SamplerError) -> Self {
        TrainError::Observable(e.into())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainerConfig {
    pub n_iterations: usize,
    /// Step size `η`.
    pub learning_rate: f64,
    /// Diagonal shift `λ` added to `S`.
    pub sr_shift: f64,
    pub sampler: SamplerConfig,
    /// Seeds parameter initialization and per-iteration Metropolis streams.
    pub seed: u64,
    /// Checkpoint period in iterations; 0 disables periodic checkpoints.
    pub checkpoint_every: usize,
}

impl Default for TrainerConfig {
    fn default() -> Self {
        Self {
            n_iterations: 500,
            learning_rate: 0.02,
            sr_shift: 1e-2,
            sampler: SamplerConfig::default(),
            seed: 0,
            checkpoint_every: 0,
        }
    }
}

impl TrainerConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(TrainError::InvalidConfig {
                field: "learning_rate",
                reason: format!("must be a positive finite number, got {}", self.learning_rate),
            });
        }
        if !(self.sr_shift >= 0.0 && self.sr_shift.is_finite()) {
            return Err(TrainError::InvalidConfig {
                field: "sr_shift",
                reason: format!("must be a non-negative finite number, got {}", self.sr_shift),
            });
        }
        Ok(())
    }

    /// Sampler settings for one iteration. Exact modes are returned as is;
    /// Metropolis gets a fresh stream per iteration derived from the seeds.
    pub fn sampler_for_iteration(&self, iteration: usize) -> SamplerConfig {
        let mut cfg = self.sampler.clone();
        if !cfg.mode.is_exact() {
            cfg.rng_seed = mix_seed(self.seed ^ self.sampler.rng_seed, iteration as u64);
        }
        cfg
    }
}

/// SplitMix64 finalizer applied to `seed + (i + 1)·φ`.
fn mix_seed(seed: u64, i: u64) -> u64 {
    let mut z = seed.wrapping_add((i + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// State of one iteration, measured before its update is applied.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainRecord {
    pub iteration: usize,
    pub energy: EstimatedValue,
    pub eps_rel: Option<f64>,
    /// Energy fluctuation density `(⟨H²⟩ - ⟨H⟩²)/L`.
    pub sigma2: f64,
    pub params: Vec<f64>,
}

/// Linear-algebra by-products of one SR step.
#[derive(Debug, Clone, PartialEq)]
pub struct SrDiagnostics {
    /// `S` before the diagonal shift.
    pub covariance: DMatrix<f64>,
    pub force: DVector<f64>,
    /// The parameter change `W_new - W_old`.
    pub update: DVector<f64>,
    /// True when the Cholesky factorization failed and a gradient step was used.
    pub fell_back: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SrStep {
    pub params: AnsatzParams,
    pub record: TrainRecord,
    pub diagnostics: SrDiagnostics,
}

/// Estimated moments of one ensemble: energy, fluctuation density, `S`, `F`.
struct Moments {
    energy: EstimatedValue,
    sigma2: f64,
    covariance: DMatrix<f64>,
    force: DVector<f64>,
}

fn moments(ensemble: &Ensemble<'_>) -> Moments {
    let model = ensemble.model();
    let params = ensemble.params();
    let k = params.hidden_units();

    let first = ensemble.expect_many(1 + k, |c, out| {
        out[0] = local_energy(model, params, c).total;
        params.log_derivatives_at(c.magnetization(), &mut out[1..]);
    });
    let energy = first[0];
    let mean_o: Vec<f64> = first[1..].iter().map(|v| v.mean).collect();

    // Layout: [ (E-Ē)², F₀..F_{K-1}, S upper triangle row-major ].
    let n_upper = k * (k + 1) / 2;
    let second = ensemble.expect_many(1 + k + n_upper, |c, out| {
        let de = local_energy(model, params, c).total - energy.mean;
        let mut o = vec![0.0; k];
        params.log_derivatives_at(c.magnetization(), &mut o);
        for (x, m) in o.iter_mut().zip(&mean_o) {
            *x -= m;
        }
        out[0] = de * de;
        for a in 0..k {
            out[1 + a] = o[a] * de;
        }
        let mut idx = 1 + k;
        for a in 0..k {
            for b in a..k {
                out[idx] = o[a] * o[b];
                idx += 1;
            }
        }
    });
    let force = DVector::from_iterator(k, second[1..=k].iter().map(|v| v.mean));
    let mut covariance = DMatrix::zeros(k, k);
    let mut idx = 1 + k;
    for a in 0..k {
        for b in a..k {
            covariance[(a, b)] = second[idx].mean;
            covariance[(b, a)] = second[idx].mean;
            idx += 1;
        }
    }
    Moments {
        energy,
        sigma2: second[0].mean / model.sites() as f64,
        covariance,
        force,
    }
}

/// Solves `(S + λI) δ = F`, falling back to `δ = F` when the shifted matrix
/// is not positive definite.
fn sr_direction(covariance: &DMatrix<f64>, force: &DVector<f64>, shift: f64) -> (DVector<f64>, bool) {
    let k = covariance.nrows();
    let shifted = covariance + DMatrix::identity(k, k) * shift;
    match shifted.cholesky() {
        Some(chol) => {
            let delta = chol.solve(force);
            if delta.iter().all(|x| x.is_finite()) {
                (delta, false)
            } else {
                log::warn!("SR solve produced non-finite values; using a plain gradient step");
                (force.clone(), true)
            }
        }
        None => {
            log::warn!("S + λI is not positive definite (λ = {shift}); using a plain gradient step");
            (force.clone(), true)
        }
    }
}

/// One SR update from `params`, labelled `iteration` in the record.
pub fn sr_step(
    model: &ModelSpec,
    params: &AnsatzParams,
    cfg: &TrainerConfig,
    iteration: usize,
    ed_reference: Option<f64>,
) -> Result<SrStep, TrainError> {
    let sampler = cfg.sampler_for_iteration(iteration);
    let ensemble = Ensemble::build(model, params, &sampler)?;
    let m = moments(&ensemble);
    let (delta, fell_back) = sr_direction(&m.covariance, &m.force, cfg.sr_shift);
    let update = -cfg.learning_rate * delta;
    let new_weights: Vec<f64> = params
        .weights()
        .iter()
        .zip(update.iter())
        .map(|(w, d)| w + d)
        .collect();
    let eps_rel = match ed_reference {
        Some(e) => Some(relative_energy_error(m.energy.mean, e)?),
        None => None,
    };
    let record = TrainRecord {
        iteration,
        energy: m.energy,
        eps_rel,
        sigma2: m.sigma2,
        params: params.weights().to_vec(),
    };
    Ok(SrStep {
        params: params.with_weights(new_weights)?,
        record,
        diagnostics: SrDiagnostics {
            covariance: m.covariance,
            force: m.force,
            update,
            fell_back,
        },
    })
}

/// Output of a completed (or aborted) run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainRun {
    pub records: Vec<TrainRecord>,
    /// Parameters after the last successful update.
    pub final_params: AnsatzParams,
}

/// Random initial parameters for `K` hidden units, seeded from the trainer.
pub fn initial_params(
    hidden: usize,
    activation: Activation,
    seed: u64,
) -> Result<AnsatzParams, AnsatzError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    AnsatzParams::random_init(hidden, activation, &mut rng)
}

pub fn train(
    model: &ModelSpec,
    initial: &AnsatzParams,
    cfg: &TrainerConfig,
    ed_reference: Option<f64>,
) -> Result<TrainRun, TrainError> {
    train_with(model, initial, cfg, ed_reference, |_, _| {})
}

/// [`train`] with a callback invoked after every iteration with the record
/// and the updated parameters.
pub fn train_with<C>(
    model: &ModelSpec,
    initial: &AnsatzParams,
    cfg: &TrainerConfig,
    ed_reference: Option<f64>,
    mut on_iteration: C,
) -> Result<TrainRun, TrainError>
where
    C: FnMut(&TrainRecord, &AnsatzParams),
{
    cfg.validate()?;
    let mut params = initial.clone();
    let mut records = Vec::with_capacity(cfg.n_iterations);
    for iteration in 0..cfg.n_iterations {
        let step = match sr_step(model, &params, cfg, iteration, ed_reference) {
            Ok(step) => step,
            Err(TrainError::Ansatz(AnsatzError::NonFiniteWeight { index, value })) => {
                return Err(diverged(
                    iteration,
                    format!("weight {index} became {value}"),
                    records,
                    params,
                ));
            }
            Err(e) => return Err(e),
        };
        if !step.record.energy.mean.is_finite() || !step.record.sigma2.is_finite() {
            let reason = format!(
                "energy {} / fluctuation {} is not finite",
                step.record.energy.mean, step.record.sigma2
            );
            return Err(diverged(iteration, reason, records, params));
        }
        on_iteration(&step.record, &step.params);
        records.push(step.record);
        params = step.params;
    }
    Ok(TrainRun {
        records,
        final_params: params,
    })
}

fn diverged(
    iteration: usize,
    reason: String,
    records: Vec<TrainRecord>,
    params: AnsatzParams,
) -> TrainError {
    log::error!("training diverged at iteration {iteration}: {reason}");
    TrainError::Diverged {
        iteration,
        reason,
        partial: Box::new(TrainRun {
            records,
            final_params: params,
        }),
    }
}

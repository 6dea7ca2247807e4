//! Local energy and the diagnostics derived from it.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ansatz::AnsatzParams;
use crate::model::{ModelSpec, SpinConfig};
use crate::sampler::{Ensemble, EstimatedValue, SamplerConfig, SamplerError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ObservableError {
    #[error(transparent)]
    Sampler(#[from] SamplerError),
    #[error("relative error undefined for a zero reference energy")]
    ZeroReference,
    #[error("energy variance {value} is negative beyond {sigmas} standard errors")]
    NegativeVariance { value: f64, sigmas: f64 },
}

/// `E_loc(s) = ⟨s|H|ψ⟩ / ⟨s|ψ⟩`, split into its diagonal and off-diagonal parts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalEnergyTerms {
    pub zz: f64,
    pub transverse: f64,
    pub total: f64,
}

/// Local energy with the exact activation.
///
/// The transverse part is `-g Σᵢ ψ(s′ᵢ)/ψ(s)`. Since `ψ` sees only `M`, every
/// up spin contributes the same ratio (to `M - 2`) and every down spin the
/// other one (to `M + 2`).
pub fn local_energy(model: &ModelSpec, params: &AnsatzParams, config: &SpinConfig) -> LocalEnergyTerms {
    let zz = model.ising_energy(config.spins());
    let transverse = if model.field() == 0.0 {
        0.0
    } else {
        let m = config.magnetization();
        let here = params.log_amplitude_at(m);
        let n_up = config.n_up() as f64;
        let n_down = config.len() as f64 - n_up;
        let mut flips = 0.0;
        if n_up > 0.0 {
            flips += n_up * (params.log_amplitude_at(m - 2) - here).exp();
        }
        if n_down > 0.0 {
            flips += n_down * (params.log_amplitude_at(m + 2) - here).exp();
        }
        -model.field() * flips
    };
    LocalEnergyTerms {
        zz,
        transverse,
        total: zz + transverse,
    }
}

/// Whether a number came from exact summation or from Markov-chain samples.
///
/// Under sampling, `⟨H²⟩ = ⟨E_loc²⟩` is the usual VMC estimator rather than an
/// identity, and outputs carry that flag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EstimatorKind {
    Exact,
    Sampled,
}

/// `⟨H⟩` and `(⟨H²⟩ - ⟨H⟩²)/L` from one ensemble.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyStats {
    pub energy: EstimatedValue,
    pub fluctuation: EstimatedValue,
    pub estimator: EstimatorKind,
}

/// Two passes over the ensemble so the variance is formed from centered
/// values.
pub fn energy_stats(ensemble: &Ensemble<'_>) -> Result<EnergyStats, ObservableError> {
    let model = ensemble.model();
    let params = ensemble.params();
    let energy = ensemble.expect(|c| local_energy(model, params, c).total);
    let centered = ensemble.expect(|c| {
        let d = local_energy(model, params, c).total - energy.mean;
        d * d
    });
    let l = model.sites() as f64;
    let fluctuation = EstimatedValue {
        mean: centered.mean / l,
        variance_of_mean: centered.variance_of_mean / (l * l),
        n_samples: centered.n_samples,
    };
    if fluctuation.mean < -3.0 * fluctuation.std_error() {
        return Err(ObservableError::NegativeVariance {
            value: fluctuation.mean,
            sigmas: 3.0,
        });
    }
    Ok(EnergyStats {
        energy,
        fluctuation,
        estimator: if ensemble.is_exact() {
            EstimatorKind::Exact
        } else {
            EstimatorKind::Sampled
        },
    })
}

/// Variational energy `⟨H⟩`.
pub fn energy(
    model: &ModelSpec,
    params: &AnsatzParams,
    cfg: &SamplerConfig,
) -> Result<EstimatedValue, ObservableError> {
    let ensemble = Ensemble::build(model, params, cfg)?;
    Ok(ensemble.expect(|c| local_energy(model, params, c).total))
}

/// Energy fluctuation density `(⟨H²⟩ - ⟨H⟩²)/L`.
pub fn fluctuation_density(
    model: &ModelSpec,
    params: &AnsatzParams,
    cfg: &SamplerConfig,
) -> Result<EstimatedValue, ObservableError> {
    let ensemble = Ensemble::build(model, params, cfg)?;
    Ok(energy_stats(&ensemble)?.fluctuation)
}

/// `|E - E_ref| / |E_ref|`.
pub fn relative_energy_error(e_nqs: f64, e_ed: f64) -> Result<f64, ObservableError> {
    if e_ed == 0.0 {
        return Err(ObservableError::ZeroReference);
    }
    Ok((e_nqs - e_ed).abs() / e_ed.abs())
}

/// Which state a magnetization number describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StateBranch {
    /// Even activation: superposition of `M` and `-M`, so `⟨Sᶻ⟩ = 0` by parity.
    Symmetric,
    /// Linear activation: the product state `e^{W M}`.
    ProductState,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Magnetization {
    /// `L⁻¹ Σᵢ ⟨Sᶻᵢ⟩`.
    pub signed: EstimatedValue,
    /// `⟨|M|⟩ / L`.
    pub absolute: EstimatedValue,
    pub branch: StateBranch,
}

pub fn magnetization(
    model: &ModelSpec,
    params: &AnsatzParams,
    cfg: &SamplerConfig,
) -> Result<Magnetization, ObservableError> {
    let ensemble = Ensemble::build(model, params, cfg)?;
    let l = model.sites() as f64;
    let both = ensemble.expect_many(2, |c, out| {
        let m = c.magnetization() as f64 / l;
        out[0] = m;
        out[1] = m.abs();
    });
    Ok(Magnetization {
        signed: both[0],
        absolute: both[1],
        branch: if params.activation().is_even() {
            StateBranch::Symmetric
        } else {
            StateBranch::ProductState
        },
    })
}

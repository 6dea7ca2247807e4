//! Permutation-invariant single-hidden-layer wave functions.
//!
//! A network whose weight rows are constant reads its input only through the
//! total magnetization `M`, so `log ψ(s) = Σₖ f(Wₖ M)`. All evaluations here
//! are written in terms of `M`; flipping one spin moves `M` by ±2 and never
//! requires touching the full configuration.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::SpinConfig;

/// Default row-constancy tolerance for [`symmetrize_weights`].
pub const SYMMETRY_TOLERANCE: f64 = 1e-8;

/// Range the training initializer draws weights from.
pub const INIT_RANGE: (f64, f64) = (0.01, 0.1);

const CHECKPOINT_MAGIC: &str = "permnqs-params v1";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnsatzError {
    #[error("an ansatz needs at least one hidden unit (K ≥ 1)")]
    NoHiddenUnits,
    #[error("weight {index} is not finite ({value})")]
    NonFiniteWeight { index: usize, value: f64 },
    #[error("unknown activation `{0}` (expected log-cosh, abs or linear)")]
    UnknownActivation(String),
    #[error("malformed checkpoint: {0}")]
    Checkpoint(String),
}

/// Hidden-unit activation.
///
/// `LogCosh` is the RBM choice. `Abs` is its asymptotically linear twin and
/// `Linear` gives the product state `e^{W M}` used by the closed forms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Activation {
    #[default]
    LogCosh,
    Abs,
    Linear,
}

impl Activation {
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::LogCosh => log_cosh(x),
            Activation::Abs => x.abs(),
            Activation::Linear => x,
        }
    }

    #[inline]
    pub fn derivative(self, x: f64) -> f64 {
        match self {
            Activation::LogCosh => x.tanh(),
            Activation::Abs => {
                if x > 0.0 {
                    1.0
                } else if x < 0.0 {
                    -1.0
                } else {
                    0.0
                }
            }
            Activation::Linear => 1.0,
        }
    }

    /// Whether `f(-x) = f(x)`, i.e. the state is symmetric under `s → -s`.
    pub fn is_even(self) -> bool {
        !matches!(self, Activation::Linear)
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::LogCosh => "log-cosh",
            Activation::Abs => "abs",
            Activation::Linear => "linear",
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Activation {
    type Err = AnsatzError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "log-cosh" | "logcosh" => Ok(Activation::LogCosh),
            "abs" => Ok(Activation::Abs),
            "linear" => Ok(Activation::Linear),
            other => Err(AnsatzError::UnknownActivation(other.to_string())),
        }
    }
}

/// `log cosh x` without overflow: `|x| - log 2 + log(1 + e^{-2|x|})`.
#[inline]
pub fn log_cosh(x: f64) -> f64 {
    let a = x.abs();
    a - std::f64::consts::LN_2 + (-2.0 * a).exp().ln_1p()
}

/// The `K` independent weights of a permutation-invariant network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnsatzParams {
    weights: Vec<f64>,
    activation: Activation,
}

impl AnsatzParams {
    pub fn new(weights: Vec<f64>, activation: Activation) -> Result<Self, AnsatzError> {
        if weights.is_empty() {
            return Err(AnsatzError::NoHiddenUnits);
        }
        if let Some((index, &value)) = weights.iter().enumerate().find(|(_, w)| !w.is_finite()) {
            return Err(AnsatzError::NonFiniteWeight { index, value });
        }
        Ok(Self {
            weights,
            activation,
        })
    }

    pub fn single(weight: f64, activation: Activation) -> Result<Self, AnsatzError> {
        Self::new(vec![weight], activation)
    }

    /// Training initializer: weights uniform in [`INIT_RANGE`].
    ///
    /// `W = 0` is stationary for the log-cosh energy, so the draw stays away
    /// from it. Exactly repeated values are spread by a 1e-3 relative jitter
    /// so the SR covariance is not rank deficient from the start.
    pub fn random_init<R: Rng + ?Sized>(
        hidden: usize,
        activation: Activation,
        rng: &mut R,
    ) -> Result<Self, AnsatzError> {
        let weights: Vec<f64> = (0..hidden)
            .map(|_| rng.random_range(INIT_RANGE.0..INIT_RANGE.1))
            .collect();
        Self::new(separate_duplicates(weights, rng), activation)
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn hidden_units(&self) -> usize {
        self.weights.len()
    }

    /// Returns a copy with new weights, keeping the activation.
    pub fn with_weights(&self, weights: Vec<f64>) -> Result<Self, AnsatzError> {
        Self::new(weights, self.activation)
    }

    /// `log ψ` as a function of the total magnetization.
    #[inline]
    pub fn log_amplitude_at(&self, magnetization: i64) -> f64 {
        let m = magnetization as f64;
        let f = self.activation;
        self.weights.iter().map(|&w| f.apply(w * m)).sum()
    }

    /// `Oₖ = ∂ log ψ / ∂Wₖ = M f′(Wₖ M)` written into `out`.
    pub fn log_derivatives_at(&self, magnetization: i64, out: &mut [f64]) {
        let m = magnetization as f64;
        let f = self.activation;
        for (o, &w) in out.iter_mut().zip(&self.weights) {
            *o = m * f.derivative(w * m);
        }
    }

    /// Plain-text checkpoint: a header record followed by one weight per line.
    pub fn to_checkpoint(&self) -> String {
        let mut out = format!(
            "{CHECKPOINT_MAGIC} K={} activation={}\n",
            self.weights.len(),
            self.activation
        );
        for w in &self.weights {
            out.push_str(&format!("{w}\n"));
        }
        out
    }

    pub fn from_checkpoint(text: &str) -> Result<Self, AnsatzError> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines
            .next()
            .ok_or_else(|| AnsatzError::Checkpoint("empty file".into()))?;
        let rest = header
            .strip_prefix(CHECKPOINT_MAGIC)
            .ok_or_else(|| AnsatzError::Checkpoint(format!("bad header `{header}`")))?;
        let mut hidden = None;
        let mut activation = None;
        for field in rest.split_whitespace() {
            match field.split_once('=') {
                Some(("K", v)) => {
                    hidden = Some(v.parse::<usize>().map_err(|e| {
                        AnsatzError::Checkpoint(format!("bad K `{v}`: {e}"))
                    })?)
                }
                Some(("activation", v)) => activation = Some(v.parse::<Activation>()?),
                _ => return Err(AnsatzError::Checkpoint(format!("unknown header field `{field}`"))),
            }
        }
        let hidden = hidden.ok_or_else(|| AnsatzError::Checkpoint("missing K".into()))?;
        let activation =
            activation.ok_or_else(|| AnsatzError::Checkpoint("missing activation".into()))?;
        let weights = lines
            .map(|l| {
                l.trim()
                    .parse::<f64>()
                    .map_err(|e| AnsatzError::Checkpoint(format!("bad weight `{l}`: {e}")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        if weights.len() != hidden {
            return Err(AnsatzError::Checkpoint(format!(
                "header says K={hidden} but {} weights follow",
                weights.len()
            )));
        }
        Self::new(weights, activation)
    }
}

fn separate_duplicates<R: Rng + ?Sized>(mut weights: Vec<f64>, rng: &mut R) -> Vec<f64> {
    for i in 1..weights.len() {
        while weights[..i].contains(&weights[i]) {
            let jitter: f64 = rng.random_range(-1.0..1.0);
            weights[i] *= 1.0 + 1e-3 * jitter;
        }
    }
    weights
}

/// `log ψ(s) = Σₖ f(Wₖ Mₛ)`.
pub fn log_amplitude(params: &AnsatzParams, config: &SpinConfig) -> f64 {
    params.log_amplitude_at(config.magnetization())
}

/// `Oₖ(s) = Mₛ f′(Wₖ Mₛ)`.
pub fn log_derivatives(params: &AnsatzParams, config: &SpinConfig) -> Vec<f64> {
    let mut out = vec![0.0; params.hidden_units()];
    params.log_derivatives_at(config.magnetization(), &mut out);
    out
}

/// `log ψ(s′) − log ψ(s)` where `s′` is `s` with `flip_site` flipped.
pub fn log_amplitude_ratio(params: &AnsatzParams, config: &SpinConfig, flip_site: usize) -> f64 {
    let m = config.magnetization();
    let flipped = m - 2 * i64::from(config.spin(flip_site));
    params.log_amplitude_at(flipped) - params.log_amplitude_at(m)
}

/// An unconstrained `K × L` first-layer weight matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseWeights {
    matrix: DMatrix<f64>,
}

impl DenseWeights {
    pub fn new(matrix: DMatrix<f64>) -> Result<Self, AnsatzError> {
        if matrix.nrows() == 0 || matrix.ncols() == 0 {
            return Err(AnsatzError::NoHiddenUnits);
        }
        if let Some((index, &value)) = matrix.iter().enumerate().find(|(_, w)| !w.is_finite()) {
            return Err(AnsatzError::NonFiniteWeight { index, value });
        }
        Ok(Self { matrix })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, AnsatzError> {
        let k = rows.len();
        let l = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != l) {
            return Err(AnsatzError::Checkpoint("ragged weight rows".into()));
        }
        Self::new(DMatrix::from_fn(k, l, |i, j| rows[i][j]))
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    /// Hidden pre-activations `yᵢ(s) = Σⱼ Wᵢⱼ sⱼ`.
    pub fn preactivations(&self, config: &SpinConfig) -> Vec<f64> {
        self.matrix
            .row_iter()
            .map(|row| {
                row.iter()
                    .zip(config.spins())
                    .map(|(w, &s)| w * f64::from(s))
                    .sum()
            })
            .collect()
    }
}

/// Rows of a dense matrix that fail the row-constancy test.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("weight matrix is not permutation invariant: rows {violating_rows:?} vary by up to {max_deviation}")]
pub struct SymmetryViolation {
    pub violating_rows: Vec<usize>,
    pub max_deviation: f64,
}

/// Collapses a row-constant `K × L` matrix to its `K` independent weights.
///
/// Permutation invariance of every hidden pre-activation holds exactly when
/// each row is constant; any row whose spread exceeds `tolerance` is reported.
pub fn symmetrize_weights(
    dense: &DenseWeights,
    tolerance: f64,
    activation: Activation,
) -> Result<AnsatzParams, SymmetryViolation> {
    let mut violating_rows = Vec::new();
    let mut max_deviation = 0.0_f64;
    for (i, row) in dense.matrix.row_iter().enumerate() {
        let (lo, hi) = row
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &w| (lo.min(w), hi.max(w)));
        let spread = hi - lo;
        if spread > tolerance {
            violating_rows.push(i);
            max_deviation = max_deviation.max(spread);
        }
    }
    if !violating_rows.is_empty() {
        return Err(SymmetryViolation {
            violating_rows,
            max_deviation,
        });
    }
    let weights = dense.matrix.column(0).iter().copied().collect();
    Ok(AnsatzParams::new(weights, activation).expect("validated dense weights"))
}

//! Closed forms for the one-parameter product state `ψ(s) = e^{W Mₛ}`.
//!
//! Each spin of that state is independent with `⟨Zᵢ⟩ = tanh 2W` and
//! `⟨Xᵢ⟩ = 1/cosh 2W`, so energy, magnetization and the energy variance
//! reduce to sums over the coupling geometry. Kac normalization makes the
//! energy independent of `α`; the variance depends on `α` through
//! [`pair_sum`] and [`triple_sum`].

use std::fmt;

use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::model::{distance_row_sum, harmonic_number, kac_factor, pair_sum, triple_sum};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalyticError {
    #[error(
        "g = {field} is on the paramagnetic side of the one-parameter solution \
         (requires g < {threshold} for J = {coupling}, L = {size})"
    )]
    Paramagnetic {
        coupling: f64,
        field: f64,
        size: SystemSize,
        threshold: f64,
    },
    #[error("closed form `{formula}` requires {requirement}")]
    Precondition {
        formula: &'static str,
        requirement: &'static str,
    },
    #[error("scaling fit needs at least 5 points inside the window, got {0}")]
    TooFewPoints(usize),
    #[error("scaling fit received a non-positive value {value} at L = {size}")]
    NonPositive { size: f64, value: f64 },
}

/// Finite ring size or the thermodynamic limit.
///
/// The limit is its own variant because the limiting expressions are
/// different formulas, not large-`L` evaluations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SystemSize {
    Finite(usize),
    Infinite,
}

impl fmt::Display for SystemSize {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SystemSize::Finite(l) => write!(f, "{l}"),
            SystemSize::Infinite => f.write_str("inf"),
        }
    }
}

impl Serialize for SystemSize {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl std::str::FromStr for SystemSize {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "inf" | "infinite" | "infinity" => Ok(SystemSize::Infinite),
            other => other
                .parse::<usize>()
                .map(SystemSize::Finite)
                .map_err(|e| format!("bad system size `{other}`: {e}")),
        }
    }
}

impl SystemSize {
    /// `1 - 1/L`, which is 1 in the limit.
    fn finite_size_factor(self) -> f64 {
        match self {
            SystemSize::Finite(l) => 1.0 - 1.0 / l as f64,
            SystemSize::Infinite => 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClosedFormInputs {
    pub coupling: f64,
    pub field: f64,
    pub size: SystemSize,
    pub alpha: f64,
    pub weight: f64,
}

/// `E(W) = -J(L-1) tanh²2W + gL tanh 2W sinh 2W - gL cosh 2W`.
///
/// Defined for the fully-connected model and finite `L`. For the limit use
/// [`energy_density_closed_form`].
pub fn energy_closed_form(inputs: &ClosedFormInputs) -> Result<f64, AnalyticError> {
    if inputs.alpha != 0.0 {
        return Err(AnalyticError::Precondition {
            formula: "energy",
            requirement: "alpha = 0",
        });
    }
    let SystemSize::Finite(l) = inputs.size else {
        return Err(AnalyticError::Precondition {
            formula: "energy",
            requirement: "a finite system size",
        });
    };
    let l = l as f64;
    let (j, g) = (inputs.coupling, inputs.field);
    let x = 2.0 * inputs.weight;
    let t = x.tanh();
    Ok(-j * (l - 1.0) * t * t + g * l * t * x.sinh() - g * l * x.cosh())
}

/// `E(W)/L`, including the thermodynamic limit `-J tanh²2W - g / cosh 2W`.
pub fn energy_density_closed_form(coupling: f64, field: f64, size: SystemSize, weight: f64) -> f64 {
    let x = 2.0 * weight;
    let t = x.tanh();
    -coupling * size.finite_size_factor() * t * t - field / x.cosh()
}

/// Critical field of the one-parameter solution, `2J(1 - 1/L)`.
pub fn critical_field(coupling: f64, size: SystemSize) -> f64 {
    2.0 * coupling * size.finite_size_factor()
}

/// Minimizer of [`energy_closed_form`]: `½ arccosh[(2J/g)(1 - 1/L)]`.
///
/// For finite `L` the ferromagnetic solution needs `g < 2J(1-1/L)`. In the
/// limit the critical point `g = 2J` itself is allowed and gives `W = 0`.
pub fn w_ground_state(coupling: f64, field: f64, size: SystemSize) -> Result<f64, AnalyticError> {
    let threshold = critical_field(coupling, size);
    let outside = match size {
        SystemSize::Finite(_) => field >= threshold,
        SystemSize::Infinite => field > threshold,
    };
    if outside || field.is_nan() {
        return Err(AnalyticError::Paramagnetic {
            coupling,
            field,
            size,
            threshold,
        });
    }
    if field == 0.0 {
        return Ok(f64::INFINITY);
    }
    let arg = threshold / field;
    Ok(0.5 * arg.max(1.0).acosh())
}

/// `M = tanh 2W_GS`, equal to `√(1 - g²/(4J²(1-1/L)²))`.
pub fn magnetization_closed_form(
    coupling: f64,
    field: f64,
    size: SystemSize,
) -> Result<f64, AnalyticError> {
    let w = w_ground_state(coupling, field, size)?;
    Ok((2.0 * w).tanh())
}

/// Fluctuation density at `W_GS` for `α = 0`: `g⁴L² / (8J²(L-1)³)`.
pub fn sigma2_alpha0(coupling: f64, field: f64, sites: usize) -> Result<f64, AnalyticError> {
    if sites < 2 {
        return Err(AnalyticError::Precondition {
            formula: "sigma2_alpha0",
            requirement: "L >= 2",
        });
    }
    w_ground_state(coupling, field, SystemSize::Finite(sites))?;
    let l = sites as f64;
    Ok(field.powi(4) * l * l / (8.0 * coupling * coupling * (l - 1.0).powi(3)))
}

/// Fluctuation density of `e^{W M}` for any `α`:
///
/// ```text
/// σ² = g² t² − 4Jg(1 − 1/L) t²/c
///      + 4J²(t² − t⁴)/(N² L) · Σ_{i≠j≠k} d_ij^{-α} d_jk^{-α}
///      + 2J²(1 − t⁴)/(N² L) · Σ_{i≠j} d_ij^{-2α}
/// ```
///
/// with `t = tanh 2W`, `c = cosh 2W`, evaluated in O(L) through harmonic sums.
pub fn sigma2_general(
    coupling: f64,
    field: f64,
    sites: usize,
    alpha: f64,
    weight: f64,
) -> Result<f64, AnalyticError> {
    if sites < 3 {
        return Err(AnalyticError::Precondition {
            formula: "sigma2_general",
            requirement: "L >= 3",
        });
    }
    let l = sites as f64;
    let (j, g) = (coupling, field);
    let x = 2.0 * weight;
    let t2 = x.tanh().powi(2);
    let sech = 1.0 / x.cosh();
    let kac = kac_factor(sites, alpha);
    let norm = kac * kac * l;
    let transverse = g * g * t2;
    let cross = -4.0 * j * g * (1.0 - 1.0 / l) * t2 * sech;
    let three = 4.0 * j * j * (t2 - t2 * t2) / norm * triple_sum(sites, alpha);
    let two = 2.0 * j * j * (1.0 - t2 * t2) / norm * pair_sum(sites, 2.0 * alpha);
    Ok(transverse + cross + three + two)
}

/// [`sigma2_general`] at `W = W_GS`, simplified to
/// `g⁴L²/(8J²(L-1)²) · R(2α) / R(α)²` with `R` the per-site distance sum.
pub fn sigma2_at_ground_state(
    coupling: f64,
    field: f64,
    sites: usize,
    alpha: f64,
) -> Result<f64, AnalyticError> {
    w_ground_state(coupling, field, SystemSize::Finite(sites))?;
    let l = sites as f64;
    let row = distance_row_sum(sites, alpha);
    let row2 = distance_row_sum(sites, 2.0 * alpha);
    Ok(field.powi(4) * l * l / (8.0 * coupling * coupling * (l - 1.0).powi(2)) * row2 / (row * row))
}

/// Thermodynamic limit of the ground-state fluctuation density.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Sigma2Limit {
    /// `α ≤ 1`: the Kac factor diverges and the fluctuations vanish.
    Vanishing,
    /// `α > 1`: `(g⁴/16J²) ζ(2α)/ζ(α)²`.
    Finite(f64),
}

impl Sigma2Limit {
    pub fn value(self) -> f64 {
        match self {
            Sigma2Limit::Vanishing => 0.0,
            Sigma2Limit::Finite(v) => v,
        }
    }
}

pub fn sigma2_tdl(coupling: f64, field: f64, alpha: f64) -> Sigma2Limit {
    if alpha <= 1.0 {
        Sigma2Limit::Vanishing
    } else {
        let z = zeta(alpha);
        Sigma2Limit::Finite(saturation_value(coupling, field) * zeta(2.0 * alpha) / (z * z))
    }
}

/// `α → ∞` limit of [`sigma2_tdl`], `g⁴/(16J²)`.
pub fn saturation_value(coupling: f64, field: f64) -> f64 {
    field.powi(4) / (16.0 * coupling * coupling)
}

/// Alternative saturation expression `g²/(4J)`. It agrees with
/// [`saturation_value`] only when `g² = 4J`; outputs report both.
pub fn quoted_saturation_value(coupling: f64, field: f64) -> f64 {
    field * field / (4.0 * coupling)
}

/// Riemann zeta for `s > 1`: direct sum to `N - 1` plus the Euler–Maclaurin
/// tail through the `B₄` term.
pub fn zeta(s: f64) -> f64 {
    assert!(s > 1.0, "zeta is only evaluated on s > 1, got {s}");
    const N: usize = 100;
    let n = N as f64;
    let head = harmonic_number(N - 1, s);
    let tail = n.powf(1.0 - s) / (s - 1.0) + 0.5 * n.powf(-s) + s * n.powf(-s - 1.0) / 12.0
        - s * (s + 1.0) * (s + 2.0) * n.powf(-s - 3.0) / 720.0;
    head + tail
}

/// Functional form a decay is compared against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScalingForm {
    PowerLaw,
    /// `σ = A √(log L / L)`.
    SqrtLogOverL,
    /// `σ = A / log L`.
    InverseLog,
}

impl ScalingForm {
    /// The special edge forms at `α = ½` and `α = 1`, a pure power elsewhere.
    pub fn for_alpha(alpha: f64) -> Self {
        if alpha == 0.5 {
            ScalingForm::SqrtLogOverL
        } else if alpha == 1.0 {
            ScalingForm::InverseLog
        } else {
            ScalingForm::PowerLaw
        }
    }

    fn shape(self, l: f64) -> f64 {
        match self {
            ScalingForm::PowerLaw => 1.0,
            ScalingForm::SqrtLogOverL => (l.ln() / l).sqrt(),
            ScalingForm::InverseLog => 1.0 / l.ln(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScalingFit {
    /// Least-squares slope of `log σ` against `log L`.
    pub exponent: f64,
    pub prefactor: f64,
    pub r_squared: f64,
    pub size_range: (f64, f64),
    pub form: ScalingForm,
    /// Amplitude `A` of the special form (equals `prefactor` for a power law).
    pub form_prefactor: f64,
    /// RMS of `log σ - log(A · form(L))`; for a power law, the fit residual.
    pub form_residual_rms: f64,
}

/// Fits `σ(L)` on `[window.0, window.1]`.
pub fn scaling_fit(
    points: &[(f64, f64)],
    window: (f64, f64),
    form: ScalingForm,
) -> Result<ScalingFit, AnalyticError> {
    let selected: Vec<(f64, f64)> = points
        .iter()
        .copied()
        .filter(|(l, _)| *l >= window.0 && *l <= window.1)
        .collect();
    if selected.len() < 5 {
        return Err(AnalyticError::TooFewPoints(selected.len()));
    }
    if let Some(&(size, value)) = selected.iter().find(|(_, s)| s.is_nan() || *s <= 0.0) {
        return Err(AnalyticError::NonPositive { size, value });
    }
    let xs: Vec<f64> = selected.iter().map(|(l, _)| l.ln()).collect();
    let ys: Vec<f64> = selected.iter().map(|(_, s)| s.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let exponent = sxy / sxx;
    let intercept = my - exponent * mx;
    let ss_res: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - intercept - exponent * x).powi(2))
        .sum();
    let r_squared = if syy > 0.0 {
        (1.0 - ss_res / syy).clamp(0.0, 1.0)
    } else {
        1.0
    };

    let (form_prefactor, form_residual_rms) = match form {
        ScalingForm::PowerLaw => (intercept.exp(), (ss_res / n).sqrt()),
        _ => {
            let logs: Vec<f64> = selected
                .iter()
                .map(|(l, s)| s.ln() - form.shape(*l).ln())
                .collect();
            let log_a = logs.iter().sum::<f64>() / n;
            let rms = (logs.iter().map(|v| (v - log_a).powi(2)).sum::<f64>() / n).sqrt();
            (log_a.exp(), rms)
        }
    };
    let lo = selected.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let hi = selected.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
    Ok(ScalingFit {
        exponent,
        prefactor: intercept.exp(),
        r_squared,
        size_range: (lo, hi),
        form,
        form_prefactor,
        form_residual_rms,
    })
}

//! Ring lattices, the long-range transverse-field Ising Hamiltonian and the
//! distance sums that everything downstream is built from.
//!
//! The Hamiltonian is
//!
//! ```text
//! H = -(J / N(L, α)) Σ_{i≠j} |i-j|^{-α} Zᵢ Zⱼ  -  g Σᵢ Xᵢ
//! ```
//!
//! with `|i-j|` the periodic (minimum-image) distance and `N(L, α)` the Kac
//! factor, which keeps the energy extensive. At `α = 0` this is the
//! fully-connected model with `N = L`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("site count must be at least 2, got {0}")]
    TooFewSites(usize),
    #[error("interaction exponent must be finite and non-negative, got {0}")]
    InvalidExponent(f64),
    #[error("transverse field must be finite and non-negative, got {0}")]
    InvalidField(f64),
    #[error("coupling must be finite and non-negative, got {0}")]
    InvalidCoupling(f64),
    #[error("site {site} out of range for a ring of {sites} sites")]
    SiteOutOfRange { site: usize, sites: usize },
    #[error("self-distance requested for site {0}; couplings are defined only for i ≠ j")]
    SelfDistance(usize),
    #[error("spin entries must be ±1, found {value} at site {site}")]
    InvalidSpin { site: usize, value: i8 },
    #[error("configuration has {got} sites, model expects {expected}")]
    SizeMismatch { expected: usize, got: usize },
}

/// Minimum-image distance between two sites on a ring of `sites` sites.
pub fn pbc_distance(i: usize, j: usize, sites: usize) -> Result<usize, ModelError> {
    for site in [i, j] {
        if site >= sites {
            return Err(ModelError::SiteOutOfRange { site, sites });
        }
    }
    if i == j {
        return Err(ModelError::SelfDistance(i));
    }
    let d = i.abs_diff(j);
    Ok(d.min(sites - d))
}

/// Generalized harmonic number `H_{n,r} = Σ_{k=1..n} k^{-r}`.
///
/// Summed with Neumaier compensation; `n = 0` is the empty sum.
pub fn harmonic_number(n: usize, r: f64) -> f64 {
    let mut sum = 0.0_f64;
    let mut comp = 0.0_f64;
    for k in 1..=n {
        let term = (k as f64).powf(-r);
        let t = sum + term;
        if sum.abs() >= term.abs() {
            comp += (sum - t) + term;
        } else {
            comp += (term - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// `Σ_{j≠i} d(i,j)^{-α}` for any fixed site `i`.
///
/// Every site of the ring sees distances `1..⌊L/2⌋` twice, except that for
/// even `L` the antipodal distance `L/2` occurs only once.
pub fn distance_row_sum(sites: usize, alpha: f64) -> f64 {
    let half = sites / 2;
    let doubled = 2.0 * harmonic_number(half, alpha);
    if sites.is_multiple_of(2) && half > 0 {
        doubled - (half as f64).powf(-alpha)
    } else {
        doubled
    }
}

/// Ordered-pair sum `Σ_{i≠j} d(i,j)^{-α}`; equals `2L·H_{⌊L/2⌋,α}` for odd `L`.
pub fn pair_sum(sites: usize, alpha: f64) -> f64 {
    sites as f64 * distance_row_sum(sites, alpha)
}

/// Sum over ordered triples of pairwise distinct sites of
/// `d(i,j)^{-α} d(j,k)^{-α}`; equals `L(4H²_{⌊L/2⌋,α} − 2H_{⌊L/2⌋,2α})` for odd `L`.
pub fn triple_sum(sites: usize, alpha: f64) -> f64 {
    // For fixed middle site j: (Σ_{i≠j} d^{-α})² minus the i = k diagonal.
    let row = distance_row_sum(sites, alpha);
    let row_sq = distance_row_sum(sites, 2.0 * alpha);
    sites as f64 * (row * row - row_sq)
}

/// Kac normalization `N(L, α) = (1/(L-1)) Σ_{i≠j} d(i,j)^{-α}`.
pub fn kac_factor(sites: usize, alpha: f64) -> f64 {
    pair_sum(sites, alpha) / (sites as f64 - 1.0)
}

/// Parameters of a long-range TFIM on a ring, with the Kac factor and the
/// per-distance couplings `J / (N d^α)` cached at construction.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelSpec {
    sites: usize,
    coupling: f64,
    field: f64,
    alpha: f64,
    kac: f64,
    /// Index `d` holds the coupling at distance `d`; index 0 is unused.
    by_distance: Vec<f64>,
}

impl ModelSpec {
    pub fn new(sites: usize, coupling: f64, field: f64, alpha: f64) -> Result<Self, ModelError> {
        if sites < 2 {
            return Err(ModelError::TooFewSites(sites));
        }
        if !coupling.is_finite() || coupling < 0.0 {
            return Err(ModelError::InvalidCoupling(coupling));
        }
        if !field.is_finite() || field < 0.0 {
            return Err(ModelError::InvalidField(field));
        }
        if !alpha.is_finite() || alpha < 0.0 {
            return Err(ModelError::InvalidExponent(alpha));
        }
        let kac = kac_factor(sites, alpha);
        let mut by_distance = vec![0.0; sites / 2 + 1];
        for (d, c) in by_distance.iter_mut().enumerate().skip(1) {
            *c = coupling / (kac * (d as f64).powf(alpha));
        }
        Ok(Self {
            sites,
            coupling,
            field,
            alpha,
            kac,
            by_distance,
        })
    }

    /// The `α = 0` model.
    pub fn fully_connected(sites: usize, coupling: f64, field: f64) -> Result<Self, ModelError> {
        Self::new(sites, coupling, field, 0.0)
    }

    pub fn sites(&self) -> usize {
        self.sites
    }

    pub fn coupling(&self) -> f64 {
        self.coupling
    }

    pub fn field(&self) -> f64 {
        self.field
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn kac(&self) -> f64 {
        self.kac
    }

    pub fn is_fully_connected(&self) -> bool {
        self.alpha == 0.0
    }

    /// Coupling `J / (N d^α)` between two sites at ring distance `d ≥ 1`.
    #[inline]
    pub fn coupling_at_distance(&self, d: usize) -> f64 {
        self.by_distance[d]
    }

    /// Coupling between sites `i ≠ j`.
    pub fn pair_coupling(&self, i: usize, j: usize) -> Result<f64, ModelError> {
        pbc_distance(i, j, self.sites).map(|d| self.by_distance[d])
    }

    /// Sum of the couplings seen by any one site.
    pub fn coupling_row_sum(&self) -> f64 {
        (1..self.sites)
            .map(|j| self.by_distance[j.min(self.sites - j)])
            .sum()
    }

    /// Ising energy `-Σ_{i≠j} Jᵢⱼ sᵢ sⱼ` of a configuration.
    pub fn ising_energy(&self, spins: &[i8]) -> f64 {
        let l = self.sites;
        let mut total = 0.0;
        for i in 0..l {
            let mut field_i = 0.0;
            for (j, &s_j) in spins.iter().enumerate().take(l).skip(i + 1) {
                let d = (j - i).min(l - j + i);
                field_i += self.by_distance[d] * f64::from(s_j);
            }
            total += f64::from(spins[i]) * field_i;
        }
        // Each unordered pair appears twice in the ordered sum.
        -2.0 * total
    }

    /// "odd" or "even"; recorded in run metadata.
    pub fn parity_label(&self) -> &'static str {
        if self.sites.is_multiple_of(2) {
            "even"
        } else {
            "odd"
        }
    }
}

/// A basis configuration of ±1 spins with its total magnetization cached.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SpinConfig {
    spins: Vec<i8>,
    magnetization: i64,
}

impl SpinConfig {
    pub fn new(spins: Vec<i8>) -> Result<Self, ModelError> {
        let mut m = 0i64;
        for (site, &value) in spins.iter().enumerate() {
            if value != 1 && value != -1 {
                return Err(ModelError::InvalidSpin { site, value });
            }
            m += i64::from(value);
        }
        Ok(Self {
            spins,
            magnetization: m,
        })
    }

    pub fn all_up(sites: usize) -> Self {
        Self {
            spins: vec![1; sites],
            magnetization: sites as i64,
        }
    }

    /// Bit `i` set means spin `i` is up. Sites beyond 63 are not addressable.
    pub fn from_bits(bits: u64, sites: usize) -> Self {
        debug_assert!(sites <= 64);
        let spins: Vec<i8> = (0..sites)
            .map(|i| if (bits >> i) & 1 == 1 { 1 } else { -1 })
            .collect();
        let up = (bits & mask(sites)).count_ones() as i64;
        Self {
            spins,
            magnetization: 2 * up - sites as i64,
        }
    }

    /// The representative of a magnetization sector: the first `n_up` sites up.
    pub fn with_up_count(sites: usize, n_up: usize) -> Self {
        debug_assert!(n_up <= sites);
        let spins: Vec<i8> = (0..sites).map(|i| if i < n_up { 1 } else { -1 }).collect();
        Self {
            spins,
            magnetization: 2 * n_up as i64 - sites as i64,
        }
    }

    #[inline]
    pub fn spins(&self) -> &[i8] {
        &self.spins
    }

    #[inline]
    pub fn magnetization(&self) -> i64 {
        self.magnetization
    }

    #[inline]
    pub fn spin(&self, site: usize) -> i8 {
        self.spins[site]
    }

    pub fn len(&self) -> usize {
        self.spins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spins.is_empty()
    }

    pub fn n_up(&self) -> usize {
        ((self.magnetization + self.spins.len() as i64) / 2) as usize
    }

    pub fn flip(&mut self, site: usize) {
        let s = self.spins[site];
        self.spins[site] = -s;
        self.magnetization -= 2 * i64::from(s);
    }

    pub fn flipped(&self, site: usize) -> Self {
        let mut out = self.clone();
        out.flip(site);
        out
    }

    /// Global spin flip `s → -s`.
    pub fn inverted(&self) -> Self {
        Self {
            spins: self.spins.iter().map(|s| -s).collect(),
            magnetization: -self.magnetization,
        }
    }

    /// The configuration with `out[k] = self[perm[k]]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        debug_assert_eq!(perm.len(), self.spins.len());
        Self {
            spins: perm.iter().map(|&p| self.spins[p]).collect(),
            magnetization: self.magnetization,
        }
    }

    pub fn check_len(&self, sites: usize) -> Result<(), ModelError> {
        if self.spins.len() == sites {
            Ok(())
        } else {
            Err(ModelError::SizeMismatch {
                expected: sites,
                got: self.spins.len(),
            })
        }
    }
}

fn mask(sites: usize) -> u64 {
    if sites >= 64 {
        u64::MAX
    } else {
        (1u64 << sites) - 1
    }
}

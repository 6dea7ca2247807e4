//! Reference ground-state energies.
//!
//! `ed_full` works in the full `2^L` basis with a matrix-free Hamiltonian and
//! Lanczos iteration (with a dense fallback for small systems). `ed_dicke`
//! diagonalizes the fully-connected model inside the `(L+1)`-dimensional
//! maximal-spin sector, where the Hamiltonian is tridiagonal.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{ModelSpec, SpinConfig};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EdError {
    #[error("full-basis diagonalization of L = {sites} exceeds the cap of {cap} sites")]
    TooLarge { sites: usize, cap: usize },
    #[error("sector diagonalization requires the fully-connected model (alpha = 0), got alpha = {alpha}")]
    RequiresFullyConnected { alpha: f64 },
    #[error("eigensolver did not converge: residual {residual:e} above gate {gate:e}")]
    NotConverged { residual: f64, gate: f64 },
}

impl EdError {
    pub fn is_resource_limit(&self) -> bool {
        matches!(self, EdError::TooLarge { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EdMethod {
    DenseFull,
    IterativeFull,
    DickeSector,
}

impl EdMethod {
    pub fn name(self) -> &'static str {
        match self {
            EdMethod::DenseFull => "dense-full",
            EdMethod::IterativeFull => "iterative-full",
            EdMethod::DickeSector => "dicke-sector",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EdResult {
    pub ground_energy: f64,
    pub method: EdMethod,
    pub sites: usize,
    /// `‖H v - E₀ v‖` for the returned normalized eigenvector.
    pub residual_norm: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdOptions {
    pub max_sites: usize,
    pub dense_fallback_sites: usize,
    pub tolerance: f64,
    pub residual_gate: f64,
    pub krylov_dim: usize,
    pub max_restarts: usize,
}

impl Default for EdOptions {
    fn default() -> Self {
        Self {
            max_sites: 14,
            dense_fallback_sites: 10,
            tolerance: 1e-10,
            residual_gate: 1e-8,
            krylov_dim: 120,
            max_restarts: 30,
        }
    }
}

/// Matrix-free TFIM Hamiltonian in the computational basis.
///
/// Basis index bit `i` set means spin `i` up. The Ising part is diagonal and
/// precomputed; `Xᵢ` flips bit `i`.
#[derive(Debug, Clone)]
pub struct Hamiltonian {
    sites: usize,
    field: f64,
    diagonal: Vec<f64>,
}

impl Hamiltonian {
    pub fn new(model: &ModelSpec) -> Self {
        let l = model.sites();
        let diagonal = (0..1u64 << l)
            .into_par_iter()
            .map(|bits| model.ising_energy(SpinConfig::from_bits(bits, l).spins()))
            .collect();
        Self {
            sites: l,
            field: model.field(),
            diagonal,
        }
    }

    pub fn dim(&self) -> usize {
        self.diagonal.len()
    }

    pub fn apply(&self, v: &[f64], out: &mut [f64]) {
        let l = self.sites;
        let g = self.field;
        out.par_iter_mut().enumerate().for_each(|(b, o)| {
            let mut acc = self.diagonal[b] * v[b];
            let mut flips = 0.0;
            for i in 0..l {
                flips += v[b ^ (1 << i)];
            }
            acc -= g * flips;
            *o = acc;
        });
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.dim();
        let mut h = DMatrix::from_diagonal(&DVector::from_column_slice(&self.diagonal));
        for b in 0..n {
            for i in 0..self.sites {
                h[(b, b ^ (1 << i))] -= self.field;
            }
        }
        h
    }

    fn residual(&self, energy: f64, v: &[f64]) -> f64 {
        let mut hv = vec![0.0; v.len()];
        self.apply(v, &mut hv);
        hv.iter()
            .zip(v)
            .map(|(h, x)| (h - energy * x).powi(2))
            .sum::<f64>()
            .sqrt()
    }
}

/// Lowest eigenvalue of the full Hamiltonian.
pub fn ed_full(model: &ModelSpec) -> Result<EdResult, EdError> {
    ed_full_with(model, &EdOptions::default())
}

pub fn ed_full_with(model: &ModelSpec, opts: &EdOptions) -> Result<EdResult, EdError> {
    let l = model.sites();
    if l > opts.max_sites {
        return Err(EdError::TooLarge {
            sites: l,
            cap: opts.max_sites,
        });
    }
    let h = Hamiltonian::new(model);
    let (energy, residual) = lanczos_ground(&h, opts);
    if residual <= opts.residual_gate {
        return Ok(EdResult {
            ground_energy: energy,
            method: EdMethod::IterativeFull,
            sites: l,
            residual_norm: residual,
        });
    }
    if l <= opts.dense_fallback_sites {
        log::warn!("lanczos residual {residual:e} above gate for L = {l}; using dense diagonalization");
        return dense_ground(&h, opts.residual_gate);
    }
    Err(EdError::NotConverged {
        residual,
        gate: opts.residual_gate,
    })
}

/// Dense diagonalization of the full Hamiltonian (small `L` only).
pub fn ed_dense(model: &ModelSpec) -> Result<EdResult, EdError> {
    let opts = EdOptions::default();
    if model.sites() > opts.dense_fallback_sites {
        return Err(EdError::TooLarge {
            sites: model.sites(),
            cap: opts.dense_fallback_sites,
        });
    }
    dense_ground(&Hamiltonian::new(model), opts.residual_gate)
}

fn dense_ground(h: &Hamiltonian, gate: f64) -> Result<EdResult, EdError> {
    let eig = SymmetricEigen::new(h.to_dense());
    let (idx, &energy) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("non-empty spectrum");
    let v: Vec<f64> = eig.eigenvectors.column(idx).iter().copied().collect();
    let residual = h.residual(energy, &v);
    if residual > gate {
        return Err(EdError::NotConverged { residual, gate });
    }
    Ok(EdResult {
        ground_energy: energy,
        method: EdMethod::DenseFull,
        sites: h.sites,
        residual_norm: residual,
    })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn normalize(v: &mut [f64]) -> f64 {
    let n = dot(v, v).sqrt();
    v.iter_mut().for_each(|x| *x /= n);
    n
}

/// Restarted Lanczos with full reorthogonalization. Returns the lowest Ritz
/// value and the true residual of its Ritz vector.
///
/// The uniform start vector lies in the sector that is symmetric under
/// translations, reflection and global spin flip. The ground state is
/// positive (the Hamiltonian is stoquastic) and so lives there too, which
/// keeps near-degenerate partners out of the Krylov space.
fn lanczos_ground(h: &Hamiltonian, opts: &EdOptions) -> (f64, f64) {
    let n = h.dim();
    let max_dim = opts.krylov_dim.min(n);
    let mut start = vec![1.0; n];
    normalize(&mut start);
    let mut best = (f64::NAN, f64::INFINITY);
    for _ in 0..=opts.max_restarts {
        let mut basis: Vec<Vec<f64>> = vec![start.clone()];
        let mut alphas = Vec::with_capacity(max_dim);
        let mut betas: Vec<f64> = Vec::with_capacity(max_dim);
        let mut w = vec![0.0; n];
        let mut ritz = (f64::NAN, DVector::zeros(0));
        for j in 0..max_dim {
            h.apply(&basis[j], &mut w);
            let a = dot(&basis[j], &w);
            alphas.push(a);
            for _ in 0..2 {
                for b in &basis {
                    let c = dot(b, &w);
                    w.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
                }
            }
            let beta = dot(&w, &w).sqrt();
            ritz = lowest_ritz(&alphas, &betas);
            let estimate = beta * ritz.1[j].abs();
            let scale = ritz.0.abs().max(1.0);
            let converged = estimate <= (opts.tolerance * scale).min(0.1 * opts.residual_gate);
            if converged || beta <= 1e-13 * scale || j + 1 == max_dim {
                break;
            }
            betas.push(beta);
            basis.push(w.iter().map(|x| x / beta).collect());
        }
        let (theta, y) = ritz;
        let mut x = vec![0.0; n];
        for (coef, b) in y.iter().zip(&basis) {
            x.iter_mut().zip(b).for_each(|(xi, bi)| *xi += coef * bi);
        }
        normalize(&mut x);
        let residual = h.residual(theta, &x);
        if residual < best.1 {
            best = (theta, residual);
        }
        if residual <= opts.residual_gate {
            break;
        }
        start = x;
    }
    best
}

fn lowest_ritz(alphas: &[f64], betas: &[f64]) -> (f64, DVector<f64>) {
    let m = alphas.len();
    let t = DMatrix::from_fn(m, m, |i, j| {
        if i == j {
            alphas[i]
        } else if i + 1 == j {
            betas[i]
        } else if j + 1 == i {
            betas[j]
        } else {
            0.0
        }
    });
    let eig = SymmetricEigen::new(t);
    let (idx, &theta) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("non-empty");
    (theta, eig.eigenvectors.column(idx).into_owned())
}

/// Ground energy of the fully-connected model in the maximal-spin sector.
///
/// In the Dicke basis `|n↑⟩` the Ising part is `-(J/L)(M² - L)` with
/// `M = 2n↑ - L` and `Σᵢ Xᵢ` couples `n↑` to `n↑ + 1` with amplitude
/// `√((n↑+1)(L-n↑))`.
pub fn ed_dicke(model: &ModelSpec) -> Result<EdResult, EdError> {
    if !model.is_fully_connected() {
        return Err(EdError::RequiresFullyConnected {
            alpha: model.alpha(),
        });
    }
    let l = model.sites();
    let lf = l as f64;
    let j = model.coupling();
    let g = model.field();
    let diag: Vec<f64> = (0..=l)
        .map(|n| {
            let m = 2.0 * n as f64 - lf;
            -(j / lf) * (m * m - lf)
        })
        .collect();
    let off: Vec<f64> = (0..l)
        .map(|n| -g * (((n + 1) * (l - n)) as f64).sqrt())
        .collect();
    let energy = tridiagonal_lowest_eigenvalue(&diag, &off);
    let v = tridiagonal_eigenvector(&diag, &off, energy);
    let residual = tridiagonal_residual(&diag, &off, energy, &v);
    let gate = EdOptions::default().residual_gate;
    if residual > gate {
        return Err(EdError::NotConverged { residual, gate });
    }
    Ok(EdResult {
        ground_energy: energy,
        method: EdMethod::DickeSector,
        sites: l,
        residual_norm: residual,
    })
}

/// Dicke sector when `α = 0`, otherwise the full basis.
pub fn ed_reference(model: &ModelSpec) -> Result<EdResult, EdError> {
    if model.is_fully_connected() {
        ed_dicke(model)
    } else {
        ed_full(model)
    }
}

/// Number of eigenvalues below `x` (Sturm count from the LDLᵀ pivots).
fn eigenvalues_below(diag: &[f64], off: &[f64], x: f64) -> usize {
    let mut count = 0;
    let mut q = diag[0] - x;
    for i in 0..diag.len() {
        if i > 0 {
            let prev = if q == 0.0 { f64::MIN_POSITIVE } else { q };
            q = diag[i] - x - off[i - 1] * off[i - 1] / prev;
        }
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

fn tridiagonal_lowest_eigenvalue(diag: &[f64], off: &[f64]) -> f64 {
    let n = diag.len();
    let radius = |i: usize| {
        let left = if i > 0 { off[i - 1].abs() } else { 0.0 };
        let right = if i < n - 1 { off[i].abs() } else { 0.0 };
        left + right
    };
    let mut lo = (0..n).map(|i| diag[i] - radius(i)).fold(f64::INFINITY, f64::min);
    let mut hi = (0..n).map(|i| diag[i] + radius(i)).fold(f64::NEG_INFINITY, f64::max);
    for _ in 0..300 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if eigenvalues_below(diag, off, mid) >= 1 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Inverse iteration with a shift just below the lowest eigenvalue, so the
/// shifted matrix is positive definite and the Thomas solve is stable.
fn tridiagonal_eigenvector(diag: &[f64], off: &[f64], lambda: f64) -> Vec<f64> {
    let n = diag.len();
    let scale = diag
        .iter()
        .chain(off.iter())
        .fold(1.0_f64, |m, x| m.max(x.abs()));
    let sigma = lambda - 1e-10 * scale;
    let mut x = vec![1.0; n];
    for _ in 0..4 {
        // Forward elimination, then back substitution.
        let mut c = vec![0.0; n];
        let mut d = vec![0.0; n];
        let mut pivot = diag[0] - sigma;
        c[0] = if n > 1 { off[0] / pivot } else { 0.0 };
        d[0] = x[0] / pivot;
        for i in 1..n {
            pivot = diag[i] - sigma - off[i - 1] * c[i - 1];
            if i < n - 1 {
                c[i] = off[i] / pivot;
            }
            d[i] = (x[i] - off[i - 1] * d[i - 1]) / pivot;
        }
        let mut y = vec![0.0; n];
        y[n - 1] = d[n - 1];
        for i in (0..n - 1).rev() {
            y[i] = d[i] - c[i] * y[i + 1];
        }
        normalize(&mut y);
        x = y;
    }
    x
}

fn tridiagonal_residual(diag: &[f64], off: &[f64], lambda: f64, v: &[f64]) -> f64 {
    let n = diag.len();
    (0..n)
        .map(|i| {
            let mut r = (diag[i] - lambda) * v[i];
            if i > 0 {
                r += off[i - 1] * v[i - 1];
            }
            if i < n - 1 {
                r += off[i] * v[i + 1];
            }
            r * r
        })
        .sum::<f64>()
        .sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn two_sites_is_minus_root_five() {
        let m = ModelSpec::fully_connected(2, 1.0, 1.0).unwrap();
        let full = ed_full(&m).unwrap();
        assert!((full.ground_energy + 5.0f64.sqrt()).abs() < 1e-10);
        assert!(full.residual_norm <= 1e-8);
        let dicke = ed_dicke(&m).unwrap();
        assert!((dicke.ground_energy + 5.0f64.sqrt()).abs() < 1e-10);
        assert_eq!(dicke.method, EdMethod::DickeSector);
    }

    #[test]
    fn classical_and_free_limits() {
        for alpha in [0.0, 0.5, 1.0, 2.5] {
            let m = ModelSpec::new(8, 1.0, 0.0, alpha).unwrap();
            assert_relative_eq!(ed_full(&m).unwrap().ground_energy, -7.0, max_relative = 1e-12);
            let free = ModelSpec::new(7, 0.0, 1.3, alpha).unwrap();
            assert_relative_eq!(ed_full(&free).unwrap().ground_energy, -1.3 * 7.0, max_relative = 1e-12);
        }
    }

    #[test]
    fn lanczos_matches_dense() {
        for (l, g, alpha) in [(4, 0.7, 0.0), (6, 1.5, 1.0), (7, 1.0, 2.0), (8, 2.5, 0.5)] {
            let m = ModelSpec::new(l, 1.0, g, alpha).unwrap();
            let a = ed_full(&m).unwrap();
            let b = ed_dense(&m).unwrap();
            assert_eq!(a.method, EdMethod::IterativeFull);
            assert_eq!(b.method, EdMethod::DenseFull);
            assert_relative_eq!(a.ground_energy, b.ground_energy, max_relative = 1e-11);
        }
    }

    #[test]
    fn caps_and_contracts() {
        let big = ModelSpec::fully_connected(15, 1.0, 1.0).unwrap();
        assert_eq!(ed_full(&big), Err(EdError::TooLarge { sites: 15, cap: 14 }));
        let lr = ModelSpec::new(6, 1.0, 1.0, 1.0).unwrap();
        assert!(matches!(ed_dicke(&lr), Err(EdError::RequiresFullyConnected { .. })));
        assert!(ed_reference(&lr).unwrap().method == EdMethod::IterativeFull);
    }

    #[test]
    fn sturm_bisection_matches_dense_tridiagonal() {
        let diag = [3.0, -1.0, 0.5, 2.0, -4.0];
        let off = [1.0, -2.0, 0.3, 1.5];
        let t = DMatrix::from_fn(5, 5, |i, j| {
            if i == j {
                diag[i]
            } else if i + 1 == j {
                off[i]
            } else if j + 1 == i {
                off[j]
            } else {
                0.0
            }
        });
        let dense_min = SymmetricEigen::new(t).eigenvalues.min();
        let lam = tridiagonal_lowest_eigenvalue(&diag, &off);
        assert_relative_eq!(lam, dense_min, max_relative = 1e-13);
        let v = tridiagonal_eigenvector(&diag, &off, lam);
        assert!(tridiagonal_residual(&diag, &off, lam, &v) < 1e-10);
    }

    #[test]
    fn energy_decreases_with_field() {
        let mut last = f64::INFINITY;
        for k in 0..=12 {
            let g = 0.25 * k as f64;
            let m = ModelSpec::new(8, 1.0, g, 0.8).unwrap();
            let e = ed_full(&m).unwrap().ground_energy;
            assert!(e <= last + 1e-12);
            last = e;
        }
    }
}

//! Oracles shared by the integration tests. Nothing here calls into the
//! crate's physics code, so agreement with it is an independent check.

#![allow(dead_code)]

/// Transverse-field Ising ring on `2^L` basis states, built from the
/// definitions with explicit loops.
pub struct BruteTfim {
    pub sites: usize,
    pub field: f64,
    pub diagonal: Vec<f64>,
}

pub fn ring_distance(i: usize, j: usize, l: usize) -> usize {
    let d = i.abs_diff(j);
    d.min(l - d)
}

pub fn brute_kac(l: usize, alpha: f64) -> f64 {
    let mut s = 0.0;
    for i in 0..l {
        for j in 0..l {
            if i != j {
                s += (ring_distance(i, j, l) as f64).powf(-alpha);
            }
        }
    }
    s / (l as f64 - 1.0)
}

pub fn spin(bits: usize, i: usize) -> f64 {
    if bits >> i & 1 == 1 {
        1.0
    } else {
        -1.0
    }
}

pub fn magnetization(bits: usize, l: usize) -> f64 {
    (0..l).map(|i| spin(bits, i)).sum()
}

impl BruteTfim {
    pub fn new(l: usize, j: f64, g: f64, alpha: f64) -> Self {
        let kac = brute_kac(l, alpha);
        let diagonal = (0..1usize << l)
            .map(|b| {
                let mut e = 0.0;
                for i in 0..l {
                    for k in 0..l {
                        if i != k {
                            e += spin(b, i) * spin(b, k)
                                / (ring_distance(i, k, l) as f64).powf(alpha);
                        }
                    }
                }
                -j / kac * e
            })
            .collect();
        Self {
            sites: l,
            field: g,
            diagonal,
        }
    }

    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        (0..v.len())
            .map(|b| {
                let flips: f64 = (0..self.sites).map(|i| v[b ^ (1 << i)]).sum();
                self.diagonal[b] * v[b] - self.field * flips
            })
            .collect()
    }

    /// `(⟨H⟩, (⟨H²⟩ - ⟨H⟩²)/L)` for an unnormalized real state.
    pub fn energy_and_fluctuation(&self, psi: &[f64]) -> (f64, f64) {
        let norm: f64 = psi.iter().map(|x| x * x).sum();
        let hpsi = self.apply(psi);
        let e = psi.iter().zip(&hpsi).map(|(a, b)| a * b).sum::<f64>() / norm;
        let var = hpsi
            .iter()
            .zip(psi)
            .map(|(h, p)| (h - e * p).powi(2))
            .sum::<f64>()
            / norm;
        (e, var / self.sites as f64)
    }
}

/// Product state `e^{W M}` over the full basis.
pub fn product_state(l: usize, w: f64) -> Vec<f64> {
    (0..1usize << l).map(|b| (w * magnetization(b, l)).exp()).collect()
}

pub fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Exact energy of `log ψ = Σₖ log cosh(Wₖ M)` for the fully-connected model,
/// summed over magnetization sectors.
pub fn logcosh_energy_alpha0(l: usize, j: f64, g: f64, weights: &[f64]) -> f64 {
    let lf = l as f64;
    let log_psi = |m: f64| -> f64 { weights.iter().map(|w| (w * m).cosh().ln()).sum() };
    let logs: Vec<f64> = (0..=l)
        .map(|n| binomial(l, n).ln() + 2.0 * log_psi(2.0 * n as f64 - lf))
        .collect();
    let top = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut z = 0.0;
    let mut e = 0.0;
    for (n, &log_n) in logs.iter().enumerate() {
        let m = 2.0 * n as f64 - lf;
        let p = (log_n - top).exp();
        let here = log_psi(m);
        let mut flips = 0.0;
        if n > 0 {
            flips += n as f64 * (log_psi(m - 2.0) - here).exp();
        }
        if n < l {
            flips += (l - n) as f64 * (log_psi(m + 2.0) - here).exp();
        }
        let eloc = -(j / lf) * (m * m - lf) - g * flips;
        z += p;
        e += p * eloc;
    }
    e / z
}

/// Minimizer of a smooth unimodal function on `[a, b]`: golden-section
/// search down to `1e-7`, then bisection on the sign of a central
/// difference derivative.
pub fn golden_argmin<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > 1e-7 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    let h = 1e-5;
    let slope = |x: f64| f(x + h) - f(x - h);
    let (mut lo, mut hi) = (a - 1e-6, b + 1e-6);
    if slope(lo) >= 0.0 || slope(hi) <= 0.0 {
        return 0.5 * (a + b);
    }
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if slope(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-13 {
            break;
        }
    }
    0.5 * (lo + hi)
}

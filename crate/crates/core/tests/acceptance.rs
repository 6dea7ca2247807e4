//! Acceptance criteria A1–A9. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use nalgebra::SymmetricEigen;
use permnqs_core::analytic::{
    energy_closed_form, energy_density_closed_form, scaling_fit, sigma2_alpha0, sigma2_general,
    sigma2_tdl, w_ground_state, ClosedFormInputs, ScalingForm, SystemSize,
};
use permnqs_core::ansatz::{Activation, AnsatzParams};
use permnqs_core::exact_diag::{ed_dicke, ed_full};
use permnqs_core::model::{pair_sum, triple_sum, ModelSpec};
use permnqs_core::observables::energy_stats;
use permnqs_core::sampler::{Ensemble, SamplerConfig};
use permnqs_core::trainer::{initial_params, sr_step, train, TrainerConfig};

use common::{golden_argmin, product_state, ring_distance, BruteTfim};

type Check = Result<String, String>;

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

fn a1_closed_forms() -> Check {
    let mut worst_e: f64 = 0.0;
    let mut worst_s: f64 = 0.0;
    for l in [5usize, 7, 9, 11] {
        let w_gs = w_ground_state(1.0, 1.0, SystemSize::Finite(l)).map_err(|e| e.to_string())?;
        for alpha in [0.0, 0.5, 1.0, 2.0] {
            let h = BruteTfim::new(l, 1.0, 1.0, alpha);
            for w in [0.2, 0.5, w_gs] {
                let (e, s2) = h.energy_and_fluctuation(&product_state(l, w));
                if alpha == 0.0 {
                    let closed = energy_closed_form(&ClosedFormInputs {
                        coupling: 1.0,
                        field: 1.0,
                        size: SystemSize::Finite(l),
                        alpha,
                        weight: w,
                    })
                    .map_err(|e| e.to_string())?;
                    worst_e = worst_e.max(rel(closed, e));
                }
                let closed = sigma2_general(1.0, 1.0, l, alpha, w).map_err(|e| e.to_string())?;
                worst_s = worst_s.max(rel(closed, s2));
            }
        }
    }
    let msg = format!("max rel err: energy {worst_e:.2e}, sigma2 {worst_s:.2e} (gate 1e-10)");
    if worst_e <= 1e-10 && worst_s <= 1e-10 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn a2_harmonic_identities() -> Check {
    let mut worst: f64 = 0.0;
    for l in 2usize..=13 {
        for alpha in [0.0, 0.25, 0.5, 1.0, 2.0, 3.0] {
            let w = |i: usize, j: usize| (ring_distance(i, j, l) as f64).powf(-alpha);
            let mut pairs = 0.0;
            let mut triples = 0.0;
            for i in 0..l {
                for j in 0..l {
                    if i == j {
                        continue;
                    }
                    pairs += w(i, j);
                    for k in 0..l {
                        if k != i && k != j {
                            triples += w(i, j) * w(j, k);
                        }
                    }
                }
            }
            worst = worst.max(rel(pair_sum(l, alpha), pairs));
            if l >= 3 {
                worst = worst.max(rel(triple_sum(l, alpha), triples));
            }
        }
    }
    let msg = format!("max rel err {worst:.2e} over L=2..13 (gate 1e-12)");
    if worst <= 1e-12 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn a3_stationarity() -> Check {
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for l in [3usize, 5, 8, 12, 50, 1000] {
        let gc = 2.0 * (1.0 - 1.0 / l as f64);
        for frac in [0.05, 0.2, 0.4, 0.6, 0.8, 0.9] {
            let g = frac * gc;
            let energy = |w: f64| {
                energy_closed_form(&ClosedFormInputs {
                    coupling: 1.0,
                    field: g,
                    size: SystemSize::Finite(l),
                    alpha: 0.0,
                    weight: w,
                })
                .unwrap()
            };
            let oracle = golden_argmin(energy, 0.0, 5.0);
            let w = w_ground_state(1.0, g, SystemSize::Finite(l)).map_err(|e| e.to_string())?;
            worst = worst.max((w - oracle).abs());
            count += 1;
        }
        // The domain boundary sits exactly at g = 2J(1 - 1/L).
        if w_ground_state(1.0, gc, SystemSize::Finite(l)).is_ok() {
            return Err(format!("no domain error at g = g_c for L = {l}"));
        }
        let below = gc * (1.0 - 1e-12);
        if w_ground_state(1.0, below, SystemSize::Finite(l)).is_err() {
            return Err(format!("domain error just below g_c for L = {l}"));
        }
    }
    let gc_large = 2.0 * (1.0 - 1e-9);
    if w_ground_state(1.0, gc_large * (1.0 - 1e-12), SystemSize::Finite(1_000_000_000)).is_err()
        || w_ground_state(1.0, 2.0, SystemSize::Infinite) != Ok(0.0)
        || w_ground_state(1.0, 2.0 + 1e-12, SystemSize::Infinite).is_ok()
    {
        return Err("critical field does not approach 2J".into());
    }
    let msg = format!("max |W_GS - argmin| = {worst:.2e} over {count} (g, L) points (gate 1e-8); g_c -> 2J");
    if worst <= 1e-8 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<usize> {
    (0..n)
        .map(|i| (lo.ln() + (hi.ln() - lo.ln()) * i as f64 / (n - 1) as f64).exp().round() as usize)
        .collect()
}

fn a4_scaling() -> Check {
    let sizes = log_grid(1e3, 1e6, 31);
    let window = (1e3, 1e6);
    let sigma = |alpha: f64, l: usize| -> f64 {
        let s2 = if alpha == 0.0 {
            sigma2_alpha0(1.0, 1.0, l).unwrap()
        } else {
            let w = w_ground_state(1.0, 1.0, SystemSize::Finite(l)).unwrap();
            sigma2_general(1.0, 1.0, l, alpha, w).unwrap()
        };
        s2.sqrt()
    };
    let fit = |alpha: f64, form: ScalingForm| {
        let pts: Vec<(f64, f64)> = sizes.iter().map(|&l| (l as f64, sigma(alpha, l))).collect();
        scaling_fit(&pts, window, form).map_err(|e| e.to_string())
    };
    let f0 = fit(0.0, ScalingForm::PowerLaw)?;
    let f25 = fit(0.25, ScalingForm::PowerLaw)?;
    let f75 = fit(0.75, ScalingForm::SqrtLogOverL)?;
    let f75_log = fit(0.75, ScalingForm::InverseLog)?;
    let f1 = fit(1.0, ScalingForm::InverseLog)?;
    let f1_sqrt = fit(1.0, ScalingForm::SqrtLogOverL)?;
    let msg = format!(
        "exponents: a=0 {:.4}, a=0.25 {:.4}, a=0.75 {:.4}, a=1 {:.4}; \
         rms vs sqrt(log L/L) | 1/log L: a=0.75 {:.2e} | {:.2e}, a=1 {:.2e} | {:.2e}",
        f0.exponent,
        f25.exponent,
        f75.exponent,
        f1.exponent,
        f75.form_residual_rms,
        f75_log.form_residual_rms,
        f1_sqrt.form_residual_rms,
        f1.form_residual_rms
    );
    let ok = (f0.exponent + 0.5).abs() <= 0.005
        && (f25.exponent + 0.5).abs() <= 0.02
        && f75.exponent.abs() < 0.5
        && f1.exponent.abs() < 0.5;
    if ok {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn a5_limits() -> Check {
    let v = sigma2_tdl(1.0, 1.0, 2.0).value();
    if (v - 0.025).abs() > 1e-10 {
        return Err(format!("sigma2_tdl(alpha=2) = {v}"));
    }
    for alpha in [0.3, 0.7, 1.0] {
        let z = sigma2_tdl(1.0, 1.0, alpha).value();
        if z != 0.0 {
            return Err(format!("sigma2_tdl(alpha={alpha}) = {z}, expected 0"));
        }
    }
    let l = 100_000;
    let w = w_ground_state(1.0, 1.0, SystemSize::Finite(l)).map_err(|e| e.to_string())?;
    let finite = sigma2_general(1.0, 1.0, l, 2.0, w).map_err(|e| e.to_string())?;
    let msg = format!(
        "tdl(2) = {v:.12}, zero for alpha<=1, finite L=1e5: {finite:.7} (rel {:.2e}, gate 1e-2)",
        rel(finite, 0.025)
    );
    if rel(finite, 0.025) < 1e-2 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn a6_exact_diag() -> Check {
    let two = ed_full(&ModelSpec::fully_connected(2, 1.0, 1.0).unwrap()).map_err(|e| e.to_string())?;
    let err2 = (two.ground_energy + 5f64.sqrt()).abs();
    if err2 > 1e-8 {
        return Err(format!("ed_full(L=2) = {} (err {err2:.2e})", two.ground_energy));
    }
    let mut worst: f64 = 0.0;
    for l in 3usize..=14 {
        for g in [0.5, 1.0, 1.5, 2.0, 3.0] {
            let model = ModelSpec::fully_connected(l, 1.0, g).unwrap();
            let full = ed_full(&model).map_err(|e| e.to_string())?.ground_energy;
            let dicke = ed_dicke(&model).map_err(|e| e.to_string())?.ground_energy;
            worst = worst.max((full - dicke).abs());
        }
    }
    let big = ModelSpec::fully_connected(1000, 1.0, 1.0).unwrap();
    let per_site = ed_dicke(&big).map_err(|e| e.to_string())?.ground_energy / 1000.0;
    let w = w_ground_state(1.0, 1.0, SystemSize::Finite(1000)).map_err(|e| e.to_string())?;
    let mean_field = energy_density_closed_form(1.0, 1.0, SystemSize::Finite(1000), w);
    let w_inf = w_ground_state(1.0, 1.0, SystemSize::Infinite).map_err(|e| e.to_string())?;
    let mean_field_inf = energy_density_closed_form(1.0, 1.0, SystemSize::Infinite, w_inf);
    let gap = (per_site - mean_field).abs();
    let gap_inf = (per_site - mean_field_inf).abs();
    let msg = format!(
        "L=2 err {err2:.1e}; max |dicke - full| {worst:.2e} (gate 1e-10); \
         L=1000 per-site {per_site:.7} vs mean field {mean_field:.7} ({gap:.1e}) / {mean_field_inf:.4} ({gap_inf:.1e})"
    );
    if worst <= 1e-10 && gap <= 1e-3 && gap_inf <= 1e-3 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

struct Trace {
    eps: Vec<f64>,
}

impl Trace {
    fn last(&self) -> f64 {
        *self.eps.last().unwrap()
    }

    /// Spread of ε over the last 50 iterations.
    fn band(&self) -> f64 {
        let tail = &self.eps[self.eps.len().saturating_sub(50)..];
        let hi = tail.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lo = tail.iter().cloned().fold(f64::INFINITY, f64::min);
        hi - lo
    }
}

fn run_exact(l: usize, k: usize) -> Result<Trace, String> {
    let model = ModelSpec::fully_connected(l, 1.0, 1.0).unwrap();
    let e_ed = ed_dicke(&model).map_err(|e| e.to_string())?.ground_energy;
    let cfg = TrainerConfig {
        sampler: SamplerConfig::exact_full(),
        ..TrainerConfig::default()
    };
    let init = initial_params(k, Activation::LogCosh, cfg.seed).map_err(|e| e.to_string())?;
    let run = train(&model, &init, &cfg, Some(e_ed)).map_err(|e| e.to_string())?;
    Ok(Trace {
        eps: run.records.iter().map(|r| r.eps_rel.unwrap()).collect(),
    })
}

fn a7_training_trends() -> Check {
    let by_k: Vec<Trace> = [1, 2, 4]
        .iter()
        .map(|&k| run_exact(12, k))
        .collect::<Result<_, _>>()?;
    let mut trend_k = true;
    for pair in by_k.windows(2) {
        let tol = 2.0 * pair[0].band().max(pair[1].band());
        trend_k &= pair[1].last() <= pair[0].last() + tol;
    }
    let by_l: Vec<Trace> = [8, 10, 12, 14]
        .iter()
        .map(|&l| run_exact(l, 1))
        .collect::<Result<_, _>>()?;
    let trend_l = by_l.windows(2).all(|p| p[1].last() < p[0].last());
    let reaches = by_k[0].eps.iter().any(|&e| e < 1e-2);
    let msg = format!(
        "L=12 eps(K=1,2,4) = {:.3e}, {:.3e}, {:.3e}; K=1 eps(L=8,10,12,14) = {:.3e}, {:.3e}, {:.3e}, {:.3e}",
        by_k[0].last(),
        by_k[1].last(),
        by_k[2].last(),
        by_l[0].last(),
        by_l[1].last(),
        by_l[2].last(),
        by_l[3].last()
    );
    if trend_k && trend_l && reaches {
        Ok(msg)
    } else {
        Err(format!("{msg} [K trend {trend_k}, L trend {trend_l}, <1e-2 {reaches}]"))
    }
}

fn a8_sampler_equivalence() -> Check {
    let mut worst: f64 = 0.0;
    let param_sets = [
        AnsatzParams::new(vec![0.05, 0.21, 0.4], Activation::LogCosh).unwrap(),
        AnsatzParams::new(vec![0.3, -0.1], Activation::Abs).unwrap(),
        AnsatzParams::single(0.35, Activation::Linear).unwrap(),
    ];
    for l in 2usize..=14 {
        let model = ModelSpec::fully_connected(l, 1.0, 0.9).unwrap();
        for p in &param_sets {
            let full = energy_stats(&Ensemble::build(&model, p, &SamplerConfig::exact_full()).unwrap())
                .map_err(|e| e.to_string())?;
            let sector = energy_stats(&Ensemble::build(&model, p, &SamplerConfig::exact_sector()).unwrap())
                .map_err(|e| e.to_string())?;
            worst = worst.max(rel(sector.energy.mean, full.energy.mean));
            let fl = (sector.fluctuation.mean - full.fluctuation.mean).abs()
                / full.fluctuation.mean.abs().max(1e-300);
            worst = worst.max(fl);
        }
    }

    let model = ModelSpec::fully_connected(10, 1.0, 1.0).unwrap();
    let params = AnsatzParams::new(vec![0.08, 0.15], Activation::LogCosh).unwrap();
    let exact = energy_stats(&Ensemble::build(&model, &params, &SamplerConfig::exact_full()).unwrap())
        .map_err(|e| e.to_string())?
        .energy
        .mean;
    let cfg = SamplerConfig::metropolis(8, 4000, 2024);
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| {
            let ens = Ensemble::build(&model, &params, &cfg).unwrap();
            energy_stats(&ens).unwrap()
        })
    };
    let one = run(1);
    let many = run(4);
    let z = (one.energy.mean - exact).abs() / one.energy.std_error();
    let identical = one.energy.mean.to_bits() == many.energy.mean.to_bits()
        && one.energy.variance_of_mean.to_bits() == many.energy.variance_of_mean.to_bits()
        && one.fluctuation.mean.to_bits() == many.fluctuation.mean.to_bits();
    let msg = format!(
        "sector vs full max rel {worst:.2e} (gate 1e-12); metropolis L=10 {:.6} +- {:.1e} vs exact {exact:.6} \
         ({z:.2} SE, gate 4); 1 vs 4 threads bit-identical: {identical}",
        one.energy.mean,
        one.energy.std_error()
    );
    if worst <= 1e-12 && z <= 4.0 && identical {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn a9_gradient_and_sr() -> Check {
    let mut worst_grad: f64 = 0.0;
    let h = 1e-6;
    for act in [Activation::LogCosh, Activation::Abs, Activation::Linear] {
        let p = AnsatzParams::new(vec![0.03, -0.17, 0.41, 0.9], act).unwrap();
        for m in [-13i64, -5, -1, 1, 4, 12] {
            let mut analytic = vec![0.0; 4];
            p.log_derivatives_at(m, &mut analytic);
            for k in 0..4 {
                let shifted = |d: f64| {
                    let mut w = p.weights().to_vec();
                    w[k] += d;
                    p.with_weights(w).unwrap().log_amplitude_at(m)
                };
                let fd = (shifted(h) - shifted(-h)) / (2.0 * h);
                worst_grad = worst_grad.max((fd - analytic[k]).abs() / analytic[k].abs().max(1e-3));
            }
        }
    }

    let model = ModelSpec::fully_connected(12, 1.0, 1.0).unwrap();
    let cfg = TrainerConfig {
        learning_rate: 0.01,
        sampler: SamplerConfig::exact_full(),
        ..TrainerConfig::default()
    };
    let mut worst_asym: f64 = 0.0;
    let mut worst_neg: f64 = 0.0;
    let mut worst_rise: f64 = f64::NEG_INFINITY;
    for k in [1usize, 2, 4] {
        let mut params = initial_params(k, Activation::LogCosh, 5).unwrap();
        let mut energies = Vec::with_capacity(cfg.n_iterations);
        for it in 0..cfg.n_iterations {
            let step = sr_step(&model, &params, &cfg, it, None).map_err(|e| e.to_string())?;
            let s = &step.diagnostics.covariance;
            worst_asym = worst_asym.max((s - s.transpose()).amax());
            let min_eig = SymmetricEigen::new(s.clone()).eigenvalues.min();
            worst_neg = worst_neg.max(-min_eig);
            energies.push(step.record.energy.mean);
            params = step.params;
        }
        for i in 20..energies.len() {
            let rise = (energies[i] - energies[i - 20]) / energies[i - 20].abs();
            worst_rise = worst_rise.max(rise);
        }
    }
    let msg = format!(
        "FD gradient max rel {worst_grad:.1e} (gate 1e-6); S asym {worst_asym:.1e}, min eig >= {:.1e} \
         (gate -1e-10); max 20-step rel energy rise {worst_rise:.1e} (gate 1e-12)",
        -worst_neg
    );
    if worst_grad <= 1e-6 && worst_asym <= 1e-10 && worst_neg <= 1e-10 && worst_rise <= 1e-12 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

type Criterion = (&'static str, &'static str, fn() -> Check);

fn main() {
    let criteria: [Criterion; 9] = [
        ("A1", "closed forms vs brute force", a1_closed_forms),
        ("A2", "harmonic identities", a2_harmonic_identities),
        ("A3", "stationarity of W_GS", a3_stationarity),
        ("A4", "fluctuation scaling", a4_scaling),
        ("A5", "thermodynamic limit", a5_limits),
        ("A6", "exact diagonalization", a6_exact_diag),
        ("A7", "training trends", a7_training_trends),
        ("A8", "sampler equivalence", a8_sampler_equivalence),
        ("A9", "gradient and SR sanity", a9_gradient_and_sr),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (id, name, check) in criteria {
        if !filter.is_empty() && !filter.iter().any(|f| f == id) {
            continue;
        }
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check))
            .unwrap_or_else(|_| Err("panicked".to_string()));
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("{id} PASS  {name} ({secs:.1}s): {detail}"),
            Err(detail) => {
                failed += 1;
                println!("{id} FAIL  {name} ({secs:.1}s): {detail}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}

//! Subcommand implementations. Each validates its blocks, computes, and
//! writes its CSV plus `meta.json` into `<output dir>/<run id>/`.

use std::path::PathBuf;
use std::time::Instant;

use permnqs_core::analytic::{
    critical_field, energy_closed_form, energy_density_closed_form, magnetization_closed_form,
    quoted_saturation_value, saturation_value, sigma2_alpha0, sigma2_general, sigma2_tdl,
    w_ground_state, ClosedFormInputs, Sigma2Limit, SystemSize,
};
use permnqs_core::exact_diag::{ed_dense, ed_dicke, ed_full, ed_reference, EdResult};
use permnqs_core::model::ModelSpec;
use permnqs_core::observables::{energy_stats, EnergyStats, StateBranch};
use permnqs_core::sampler::{Ensemble, SamplerConfig, SamplingMode};
use permnqs_core::trainer::{train_with, TrainError};
use serde_json::json;

use crate::config::{EdChoice, ExperimentConfig};
use crate::error::CliError;
use crate::output::{columns, num, opt_num, RunDir, RunMeta};

/// Largest `L` for which training computes a full-basis reference energy.
const FULL_REFERENCE_MAX_SITES: usize = 14;

fn open_run(cfg: &ExperimentConfig) -> Result<RunDir, CliError> {
    RunDir::create(cfg.output.run_dir())
}

pub fn run_train(cfg: &ExperimentConfig) -> Result<PathBuf, CliError> {
    cfg.output.validate()?;
    let model = cfg.model.build()?;
    let init = cfg.ansatz.initial_params(cfg.trainer.seed)?;
    let tcfg = cfg.trainer_config();
    tcfg.validate()?;
    if cfg.trainer.n_iterations == 0 {
        return Err(CliError::field("trainer.n_iterations", "must be at least 1"));
    }
    cfg.validate_sampler(&model)?;

    let reference = if !cfg.trainer.ed_reference {
        None
    } else if model.is_fully_connected() || model.sites() <= FULL_REFERENCE_MAX_SITES {
        Some(ed_reference(&model)?)
    } else {
        log::warn!(
            "no exact reference for L = {} at alpha = {}; eps_rel is left empty",
            model.sites(),
            model.alpha()
        );
        None
    };
    let e_ref = reference.map(|r| r.ground_energy);

    let run = open_run(cfg)?;
    let k = init.hidden_units();
    let mut header = columns(&["iteration", "energy", "energy_err", "eps_rel", "sigma2", "wallclock_s"]);
    header.extend((1..=k).map(|i| format!("w{i}")));
    let mut csv = run.csv("train.csv", &header)?;

    let start = Instant::now();
    let mut io_error: Option<CliError> = None;
    let every = cfg.trainer.checkpoint_every;
    let outcome = train_with(&model, &init, &tcfg, e_ref, |rec, updated| {
        if io_error.is_some() {
            return;
        }
        let wall = if cfg.output.record_wallclock {
            start.elapsed().as_secs_f64()
        } else {
            0.0
        };
        let mut cells = vec![
            rec.iteration.to_string(),
            num(rec.energy.mean),
            num(rec.energy.std_error()),
            opt_num(rec.eps_rel),
            num(rec.sigma2),
            num(wall),
        ];
        cells.extend(rec.params.iter().map(|w| num(*w)));
        let mut result = csv.row(&cells);
        if result.is_ok() && every > 0 && (rec.iteration + 1) % every == 0 {
            result = run.write_text("checkpoint.params", &updated.to_checkpoint());
        }
        if rec.iteration % 50 == 0 {
            log::info!(
                "iteration {} energy {} eps_rel {}",
                rec.iteration,
                rec.energy.mean,
                opt_num(rec.eps_rel)
            );
        }
        if let Err(e) = result {
            io_error = Some(e);
        }
    });
    if let Some(e) = io_error {
        return Err(e);
    }

    let estimator = if tcfg.sampler.mode.is_exact() { "exact" } else { "sampled" };
    let branch = if init.activation().is_even() {
        StateBranch::Symmetric
    } else {
        StateBranch::ProductState
    };
    let mut meta = RunMeta::new("train", cfg, vec!["train.csv", "checkpoint.params"]);
    let details = |final_energy: Option<f64>| {
        json!({
            "parity": model.parity_label(),
            "estimator": estimator,
            "branch": branch,
            "reference_energy": e_ref,
            "reference_method": reference.map(|r| r.method.name()),
            "final_energy": final_energy,
        })
    };

    match outcome {
        Ok(done) => {
            csv.flush()?;
            run.write_text("checkpoint.params", &done.final_params.to_checkpoint())?;
            let last = done.records.last().expect("at least one iteration");
            meta.details = details(Some(last.energy.mean));
            run.write_meta(&meta)?;
            println!(
                "train: {} iterations, final energy {} eps_rel {} -> {}",
                done.records.len(),
                last.energy.mean,
                opt_num(last.eps_rel),
                run.path().display()
            );
            Ok(run.path().to_path_buf())
        }
        Err(e) => {
            csv.mark_incomplete(&e.to_string())?;
            if let TrainError::Diverged { partial, .. } = &e {
                run.write_text("checkpoint.params", &partial.final_params.to_checkpoint())?;
            }
            meta.status = "incomplete";
            meta.details = details(None);
            run.write_meta(&meta)?;
            Err(e.into())
        }
    }
}

fn solve(model: &ModelSpec, method: EdChoice) -> Result<EdResult, CliError> {
    Ok(match method {
        EdChoice::Auto => ed_reference(model)?,
        EdChoice::Full => ed_full(model)?,
        EdChoice::Dense => ed_dense(model)?,
        EdChoice::Dicke => ed_dicke(model)?,
    })
}

pub fn run_ed(cfg: &ExperimentConfig) -> Result<PathBuf, CliError> {
    cfg.output.validate()?;
    let sizes = if cfg.ed.sizes.is_empty() {
        vec![cfg.model.sites]
    } else {
        cfg.ed.sizes.clone()
    };
    let fields = if cfg.ed.fields.is_empty() {
        vec![cfg.model.field]
    } else {
        cfg.ed.fields.clone()
    };
    let mut models = Vec::new();
    for &l in &sizes {
        for &g in &fields {
            models.push(cfg.model.build_with(l, g)?);
        }
    }
    if cfg.ed.method == EdChoice::Dicke && cfg.model.alpha != 0.0 {
        return Err(CliError::field("ed.method", "dicke requires model.alpha = 0"));
    }

    let results = models
        .iter()
        .map(|m| solve(m, cfg.ed.method))
        .collect::<Result<Vec<_>, _>>()?;
    let run = open_run(cfg)?;
    let mut csv = run.csv(
        "ed.csv",
        &columns(&["L", "alpha", "J", "g", "method", "energy", "energy_per_site", "residual"]),
    )?;
    for (m, r) in models.iter().zip(&results) {
        csv.row(&[
            m.sites().to_string(),
            num(m.alpha()),
            num(m.coupling()),
            num(m.field()),
            r.method.name().to_string(),
            num(r.ground_energy),
            num(r.ground_energy / m.sites() as f64),
            num(r.residual_norm),
        ])?;
        println!("ed: L = {} g = {} E0 = {:.10} ({})", m.sites(), m.field(), r.ground_energy, r.method.name());
    }
    csv.flush()?;
    run.write_meta(&RunMeta::new("ed", cfg, vec!["ed.csv"]))?;
    Ok(run.path().to_path_buf())
}

struct AnalyticRow {
    quantity: &'static str,
    size: SystemSize,
    weight: Option<f64>,
    value: f64,
}

pub fn run_analytic(cfg: &ExperimentConfig) -> Result<PathBuf, CliError> {
    cfg.output.validate()?;
    cfg.model.check_couplings()?;
    let (j, g, alpha) = (cfg.model.coupling, cfg.model.field, cfg.model.alpha);
    let sizes = if cfg.analytic.sizes.is_empty() {
        vec![SystemSize::Finite(cfg.model.sites), SystemSize::Infinite]
    } else {
        cfg.analytic
            .sizes
            .iter()
            .map(|s| s.resolve("analytic.sizes"))
            .collect::<Result<_, _>>()?
    };
    for s in &sizes {
        if let SystemSize::Finite(l) = s {
            if *l < 3 {
                return Err(CliError::field("analytic.sizes", format!("finite sizes need L >= 3, got {l}")));
            }
        }
    }

    let mut rows = Vec::new();
    let mut push = |quantity, size, weight, value| {
        rows.push(AnalyticRow {
            quantity,
            size,
            weight,
            value,
        })
    };
    for &size in &sizes {
        push("critical_field", size, None, critical_field(j, size));
        let w = w_ground_state(j, g, size)?;
        push("w_ground_state", size, Some(w), w);
        push("magnetization", size, Some(w), magnetization_closed_form(j, g, size)?);
        push("energy_density", size, Some(w), energy_density_closed_form(j, g, size, w));
        match size {
            SystemSize::Finite(l) => {
                if alpha == 0.0 {
                    let e = energy_closed_form(&ClosedFormInputs {
                        coupling: j,
                        field: g,
                        size,
                        alpha,
                        weight: w,
                    })?;
                    push("energy", size, Some(w), e);
                    push("sigma2_alpha0", size, Some(w), sigma2_alpha0(j, g, l)?);
                }
                push("sigma2", size, Some(w), sigma2_general(j, g, l, alpha, w)?);
                for &extra in &cfg.analytic.weights {
                    push("energy_density", size, Some(extra), energy_density_closed_form(j, g, size, extra));
                    push("sigma2", size, Some(extra), sigma2_general(j, g, l, alpha, extra)?);
                }
            }
            SystemSize::Infinite => {
                push("sigma2_tdl", size, Some(w), sigma2_tdl(j, g, alpha).value());
                for &extra in &cfg.analytic.weights {
                    push("energy_density", size, Some(extra), energy_density_closed_form(j, g, size, extra));
                }
            }
        }
    }
    push("saturation_g4_over_16J2", SystemSize::Infinite, None, saturation_value(j, g));
    push("saturation_g2_over_4J", SystemSize::Infinite, None, quoted_saturation_value(j, g));

    let run = open_run(cfg)?;
    let mut csv = run.csv("analytic.csv", &columns(&["quantity", "L", "alpha", "J", "g", "W", "value"]))?;
    for r in &rows {
        csv.row(&[
            r.quantity.to_string(),
            r.size.to_string(),
            num(alpha),
            num(j),
            num(g),
            opt_num(r.weight),
            num(r.value),
        ])?;
        println!("analytic: {} L={} -> {}", r.quantity, r.size, r.value);
    }
    csv.flush()?;
    run.write_meta(&RunMeta::new("analytic", cfg, vec!["analytic.csv"]))?;
    Ok(run.path().to_path_buf())
}

pub fn run_scan_fluctuations(cfg: &ExperimentConfig) -> Result<PathBuf, CliError> {
    cfg.output.validate()?;
    cfg.model.check_couplings()?;
    let alphas = cfg.scan.alpha.values("scan.alpha")?;
    if alphas.iter().any(|a| !(*a >= 0.0 && a.is_finite())) {
        return Err(CliError::field("scan.alpha", "values must be finite and non-negative"));
    }
    if cfg.scan.sizes.is_empty() && !cfg.scan.include_limit {
        return Err(CliError::field("scan.sizes", "grid is empty"));
    }
    if let Some(&l) = cfg.scan.sizes.iter().find(|&&l| l < 3) {
        return Err(CliError::field("scan.sizes", format!("sizes must be at least 3, got {l}")));
    }
    let (j, g) = (cfg.model.coupling, cfg.model.field);
    let mut weights = Vec::with_capacity(cfg.scan.sizes.len());
    for &l in &cfg.scan.sizes {
        weights.push(w_ground_state(j, g, SystemSize::Finite(l))?);
    }
    let w_limit = if cfg.scan.include_limit {
        Some(w_ground_state(j, g, SystemSize::Infinite)?)
    } else {
        None
    };

    let run = open_run(cfg)?;
    let mut csv = run.csv(
        "fluct.csv",
        &columns(&[
            "alpha",
            "L",
            "J",
            "g",
            "W",
            "sigma2",
            "sigma2_over_J",
            "sigma2_over_J2",
            "sigma2_tdl",
            "source",
        ]),
    )?;
    let mut row = |alpha: f64, size: String, w: f64, s2: f64, source: &str| {
        csv.row(&[
            num(alpha),
            size,
            num(j),
            num(g),
            num(w),
            num(s2),
            num(s2 / j),
            num(s2 / (j * j)),
            num(sigma2_tdl(j, g, alpha).value()),
            source.to_string(),
        ])
    };
    let mut n_rows = 0;
    for (&l, &w) in cfg.scan.sizes.iter().zip(&weights) {
        for &alpha in &alphas {
            row(alpha, l.to_string(), w, sigma2_general(j, g, l, alpha, w)?, "sigma2_general")?;
            n_rows += 1;
        }
    }
    if let Some(w) = w_limit {
        for &alpha in &alphas {
            let source = match sigma2_tdl(j, g, alpha) {
                Sigma2Limit::Vanishing => "limit_vanishing",
                Sigma2Limit::Finite(_) => "limit_zeta_ratio",
            };
            row(alpha, "inf".to_string(), w, sigma2_tdl(j, g, alpha).value(), source)?;
            n_rows += 1;
        }
    }
    csv.flush()?;
    run.write_meta(&RunMeta::new("scan-fluctuations", cfg, vec!["fluct.csv"]))?;
    println!("scan-fluctuations: {n_rows} rows -> {}", run.path().display());
    Ok(run.path().to_path_buf())
}

struct Timing {
    mode: SamplingMode,
    seconds: f64,
    stats: EnergyStats,
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

pub fn run_bench(cfg: &ExperimentConfig) -> Result<PathBuf, CliError> {
    cfg.output.validate()?;
    let model = cfg.model.build()?;
    let params = cfg.ansatz.initial_params(cfg.trainer.seed)?;
    if cfg.bench.repeats == 0 {
        return Err(CliError::field("bench.repeats", "must be at least 1"));
    }
    let mut modes = Vec::new();
    if model.sites() <= cfg.sampler.enumeration_cap {
        modes.push(SamplingMode::ExactFull);
    } else {
        log::warn!("skipping exact-full: L = {} exceeds the enumeration cap", model.sites());
    }
    if model.is_fully_connected() {
        modes.push(SamplingMode::ExactSector);
    }
    modes.push(SamplingMode::Metropolis);
    let metropolis = SamplerConfig {
        mode: SamplingMode::Metropolis,
        ..cfg.sampler.clone()
    };
    cfg.validate_sampler_for(&model, &metropolis)?;

    let mut timings = Vec::new();
    for mode in modes {
        let scfg = match mode {
            SamplingMode::Metropolis => metropolis.clone(),
            _ => SamplerConfig {
                mode,
                ..cfg.sampler.clone()
            },
        };
        let mut seconds = Vec::with_capacity(cfg.bench.repeats);
        let mut stats = None;
        for _ in 0..cfg.bench.repeats {
            let t = Instant::now();
            let ensemble = Ensemble::build(&model, &params, &scfg)?;
            let s = energy_stats(&ensemble)?;
            seconds.push(t.elapsed().as_secs_f64());
            stats = Some(s);
        }
        timings.push(Timing {
            mode,
            seconds: median(seconds),
            stats: stats.expect("repeats >= 1"),
        });
    }

    let full_time = timings
        .iter()
        .find(|t| t.mode == SamplingMode::ExactFull)
        .map(|t| t.seconds);
    let run = open_run(cfg)?;
    let mut csv = run.csv(
        "bench.csv",
        &columns(&[
            "mode",
            "L",
            "alpha",
            "repeats",
            "seconds_median",
            "energy",
            "energy_err",
            "speedup_vs_full",
        ]),
    )?;
    for t in &timings {
        let speedup = full_time.map(|f| f / t.seconds);
        csv.row(&[
            t.mode.name().to_string(),
            model.sites().to_string(),
            num(model.alpha()),
            cfg.bench.repeats.to_string(),
            num(t.seconds),
            num(t.stats.energy.mean),
            num(t.stats.energy.std_error()),
            opt_num(speedup),
        ])?;
        println!(
            "bench: {:<12} {:>12.3e} s  E = {:.10} +- {:.1e}  speedup {}",
            t.mode.name(),
            t.seconds,
            t.stats.energy.mean,
            t.stats.energy.std_error(),
            speedup.map(|s| format!("{s:.1}x")).unwrap_or_else(|| "-".into())
        );
    }
    csv.flush()?;
    run.write_meta(&RunMeta::new("bench", cfg, vec!["bench.csv"]))?;
    Ok(run.path().to_path_buf())
}

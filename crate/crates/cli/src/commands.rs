//! Subcommand implementations. Results go to stdout, progress to stderr,
//! files to the output directory; every run also emits its fully resolved
//! config so outputs are re-runnable.

use std::path::Path;

use l1phase_core::experiments::{
    fit_scaling, rr_independence_check, run_transition, ScalingVariable, TransitionCurve,
};
use l1phase_core::model::{make_instance, SignalPrior};
use l1phase_core::recovery::{basis_pursuit, BasisPursuitParams};
use l1phase_core::replica::{find_threshold, BisectConfig, IterConfig, McConfig};
use serde::Serialize;

use crate::formats::{self, out_path};
use crate::runner::RayonPool;
use crate::spec::{
    check_format, check_r, check_rho, map_usage, parse_correlation, parse_correlation_family,
    parse_grid, parse_usize_list,
};
use crate::{
    failure, usage, CliResult, Command, ConfigFile, ExperimentArgs, InstanceArgs, RecoverArgs,
    RrCheckArgs, RunOpts, SweepArgs, ThresholdArgs,
};

fn emit_config(dir: &str, name: &str, command: Command) -> CliResult<()> {
    formats::write_json(
        &out_path(dir, name, "config.json"),
        &ConfigFile::new(command),
    )
}

fn resolve_run(run: &RunOpts, default_name: &str) -> CliResult<(String, String, RayonPool)> {
    check_format(&run.format)?;
    let dir = run.out_dir();
    formats::ensure_dir(&dir)?;
    let name = run.name.clone().unwrap_or_else(|| default_name.to_string());
    Ok((dir, name, RayonPool::new(run.workers)))
}

fn print_result<T: Serialize>(run: &RunOpts, json_value: &T, text: &str) {
    if run.format == "json" {
        println!(
            "{}",
            serde_json::to_string(json_value).expect("result serialization")
        );
    } else {
        println!("{text}");
    }
}

// ---- threshold ----

pub fn threshold(args: &ThresholdArgs) -> CliResult<()> {
    let rho = check_rho(args.rho)?;
    if !(rho > 0.0 && rho < 1.0) {
        return Err(usage(format!(
            "threshold is defined for rho strictly inside (0,1), got {rho}"
        )));
    }
    let r = check_r(args.r)?;
    if args.samples == 0 || args.n_chain < 3 {
        return Err(usage("need n_chain >= 3 and samples >= 1".to_string()));
    }
    let (dir, name, pool) = resolve_run(&args.run, "threshold")?;
    let mut resolved = args.clone();
    resolved.run.out = Some(dir.clone());
    resolved.run.name = Some(name.clone());
    emit_config(&dir, &name, Command::Threshold(resolved))?;

    let prior = map_usage(SignalPrior::new(rho))?;
    let mc = McConfig {
        n_chain: args.n_chain,
        n_samples: args.samples,
        seed: args.run.seed,
    };
    let bisect = BisectConfig {
        alpha_lo: args.alpha_lo.max(rho + (0.005f64).min((1.0 - rho) / 4.0)),
        alpha_hi: args.alpha_hi,
        tol_alpha: args.tol_alpha,
    };
    let iter = IterConfig {
        damping: args.damping,
        ..IterConfig::default()
    };
    eprintln!(
        "locating threshold at rho={rho}, r={r} (n_chain={}, samples={})",
        mc.n_chain, mc.n_samples
    );
    let result = find_threshold(prior, r, &mc, &bisect, &iter, &pool)
        .map_err(|e| failure(e.to_string()))?;

    let file = formats::threshold_file(rho, r, args.run.seed, &result);
    formats::write_json(&out_path(&dir, &name, "threshold.json"), &file)?;
    formats::write_text(
        &out_path(&dir, &name, "trace.csv"),
        &formats::trace_csv(rho, r, args.run.seed, &result),
    )?;
    print_result(
        &args.run,
        &file,
        &format!(
            "alpha_c = {:.6} +- {:.6}  (rho={rho}, r={r}, chihat={:.4})",
            result.alpha_c, result.mc_stderr, result.chihat_at_threshold
        ),
    );
    Ok(())
}

// ---- sweep ----

pub fn sweep(args: &SweepArgs) -> CliResult<()> {
    let (dir, name, pool) = resolve_run(&args.run, "sweep")?;
    let mc = McConfig {
        n_chain: args.n_chain,
        n_samples: args.samples,
        seed: args.run.seed,
    };
    let iter = IterConfig::default();
    let base_bisect = BisectConfig {
        alpha_lo: args.alpha_lo,
        alpha_hi: args.alpha_hi,
        tol_alpha: args.tol_alpha,
    };

    // Either a rho-grid at fixed r, or an r-grid at fixed rho.
    let points: Vec<(f64, f64)> = match (&args.rho_grid, &args.r_grid) {
        (Some(rg), None) => {
            let r = check_r(args.r.ok_or_else(|| usage("--r required with --rho-grid"))?)?;
            parse_grid(rg)?
                .into_iter()
                .map(|rho| (rho, r))
                .collect()
        }
        (None, Some(cg)) => {
            let rho = check_rho(
                args.rho
                    .ok_or_else(|| usage("--rho required with --r-grid"))?,
            )?;
            parse_grid(cg)?.into_iter().map(|r| (rho, r)).collect()
        }
        _ => {
            return Err(usage(
                "provide exactly one of --rho-grid (with --r) or --r-grid (with --rho)"
                    .to_string(),
            ))
        }
    };
    for &(rho, r) in &points {
        check_rho(rho)?;
        if !(rho > 0.0 && rho < 1.0) {
            return Err(usage(format!("rho grid point {rho} outside (0,1)")));
        }
        check_r(r)?;
    }
    let mut resolved = args.clone();
    resolved.run.out = Some(dir.clone());
    resolved.run.name = Some(name.clone());
    emit_config(&dir, &name, Command::Sweep(resolved))?;

    let mut out_points = Vec::new();
    let mut any_ok = false;
    for (i, &(rho, r)) in points.iter().enumerate() {
        eprintln!("[{}/{}] rho={rho}, r={r}", i + 1, points.len());
        let prior = map_usage(SignalPrior::new(rho))?;
        let bisect = BisectConfig {
            alpha_lo: base_bisect
                .alpha_lo
                .max(rho + (0.005f64).min((1.0 - rho) / 4.0)),
            ..base_bisect
        };
        match find_threshold(prior, r, &mc, &bisect, &iter, &pool) {
            Ok(res) => {
                any_ok = true;
                out_points.push(formats::SweepPoint {
                    rho,
                    r,
                    alpha_c: Some(res.alpha_c),
                    mc_stderr: Some(res.mc_stderr),
                    chihat: Some(res.chihat_at_threshold),
                    error: None,
                });
            }
            Err(e) => out_points.push(formats::SweepPoint {
                rho,
                r,
                alpha_c: None,
                mc_stderr: None,
                chihat: None,
                error: Some(e.to_string()),
            }),
        }
    }
    let file = formats::SweepFile {
        schema: formats::SWEEP_SCHEMA.to_string(),
        r_fixed: args.rho_grid.as_ref().and(args.r),
        rho_fixed: args.r_grid.as_ref().and(args.rho),
        seed: args.run.seed,
        points: out_points,
    };
    formats::write_json(&out_path(&dir, &name, "sweep.json"), &file)?;
    formats::write_text(&out_path(&dir, &name, "sweep.csv"), &formats::sweep_csv(&file))?;
    if args.run.format == "json" {
        println!("{}", serde_json::to_string(&file).expect("serialization"));
    } else {
        for p in &file.points {
            match p.alpha_c {
                Some(a) => println!(
                    "rho={} r={} alpha_c={:.6} +- {:.6}",
                    p.rho,
                    p.r,
                    a,
                    p.mc_stderr.unwrap_or(f64::NAN)
                ),
                None => println!(
                    "rho={} r={} failed: {}",
                    p.rho,
                    p.r,
                    p.error.as_deref().unwrap_or("unknown")
                ),
            }
        }
    }
    if any_ok {
        Ok(())
    } else {
        Err(failure("every sweep point failed".to_string()))
    }
}

// ---- experiment ----

/// Quick reduced-scale replica estimate used to center an `auto` grid.
fn replica_center(rho: f64, r: f64, seed: u64, pool: &RayonPool) -> CliResult<f64> {
    let prior = map_usage(SignalPrior::new(rho))?;
    let mc = McConfig {
        n_chain: 20_000,
        n_samples: 16,
        seed,
    };
    let bisect = BisectConfig {
        alpha_lo: (rho + (0.005f64).min((1.0 - rho) / 4.0)).max(0.02),
        alpha_hi: 0.999,
        tol_alpha: 0.004,
    };
    find_threshold(prior, r, &mc, &bisect, &IterConfig::default(), pool)
        .map(|res| res.alpha_c)
        .map_err(|e| failure(format!("grid centering failed: {e}")))
}

pub fn experiment(args: &ExperimentArgs) -> CliResult<()> {
    let rho = check_rho(args.rho)?;
    let r = check_r(args.r)?;
    if args.trials == 0 {
        return Err(usage("--trials must be positive".to_string()));
    }
    let n_list = parse_usize_list(&args.n_list)?;
    let (dir, name, pool) = resolve_run(&args.run, "experiment")?;
    let mut resolved = args.clone();
    resolved.run.out = Some(dir.clone());
    resolved.run.name = Some(name.clone());
    emit_config(&dir, &name, Command::Experiment(resolved))?;

    let alpha_grid: Vec<f64> = if args.alpha_grid == "auto" {
        eprintln!("centering alpha grid on a reduced-scale replica estimate...");
        let center = replica_center(rho, r, args.run.seed, &pool)?;
        eprintln!("replica center: alpha_c ~ {center:.4}");
        let half = 0.05;
        (0..9)
            .map(|i| center - half + (2.0 * half / 8.0) * i as f64)
            .collect()
    } else {
        parse_grid(&args.alpha_grid)?
    };
    if alpha_grid.iter().any(|&a| !(0.0 < a && a < 1.0)) {
        return Err(usage("alpha grid leaves (0,1)".to_string()));
    }

    let rr_family = parse_correlation_family(&args.rr)?;
    let params = BasisPursuitParams::default();
    let mut curves: Vec<TransitionCurve> = Vec::new();
    for &n in &n_list {
        eprintln!(
            "running n={n} ({} alphas x {} trials)...",
            alpha_grid.len(),
            args.trials
        );
        let curve = run_transition(
            n,
            rho,
            r,
            &rr_family,
            &alpha_grid,
            args.trials,
            args.run.seed,
            &params,
            &pool,
        )
        .map_err(|e| failure(e.to_string()))?;
        eprintln!(
            "  alpha_c({n}) = {:.5} +- {:.5}{}",
            curve.alpha_c_n,
            curve.alpha_c_n_stderr,
            if curve.flagged { "  [flagged]" } else { "" }
        );
        curves.push(curve);
    }

    let fit_sqrt = map_usage(fit_scaling(&curves, ScalingVariable::InvSqrtN))?;
    let fit_inv = map_usage(fit_scaling(&curves, ScalingVariable::InvN))?;
    let preferred = if (fit_sqrt.chi2_dof - 1.0).abs() <= (fit_inv.chi2_dof - 1.0).abs() {
        "n^-1/2"
    } else {
        "n^-1"
    };
    let file = formats::ExperimentFile {
        schema: formats::EXPERIMENT_SCHEMA.to_string(),
        rho,
        r,
        rr: args.rr.clone(),
        trials: args.trials,
        seed: args.run.seed,
        alpha_grid: alpha_grid.clone(),
        curves: curves.iter().map(formats::curve_summary).collect(),
        scaling_inv_sqrt_n: (&fit_sqrt).into(),
        scaling_inv_n: (&fit_inv).into(),
        preferred_scaling: preferred.to_string(),
    };
    formats::write_json(&out_path(&dir, &name, "experiment.json"), &file)?;
    formats::write_text(
        &out_path(&dir, &name, "experiment.csv"),
        &formats::experiment_csv(&file),
    )?;
    print_result(
        &args.run,
        &file,
        &format!(
            "alpha_c_inf = {:.5} +- {:.5} (n^-1/2 scaling; n^-1 gives {:.5} +- {:.5}; chi2/dof {:.2} vs {:.2}, preferred {})",
            fit_sqrt.alpha_c_inf,
            fit_sqrt.alpha_c_inf_stderr,
            fit_inv.alpha_c_inf,
            fit_inv.alpha_c_inf_stderr,
            fit_sqrt.chi2_dof,
            fit_inv.chi2_dof,
            preferred
        ),
    );
    Ok(())
}

// ---- instance ----

pub fn instance(args: &InstanceArgs) -> CliResult<()> {
    let rho = check_rho(args.rho)?;
    if !(args.alpha > 0.0 && args.alpha < 1.0) {
        return Err(usage(format!("alpha must lie in (0,1), got {}", args.alpha)));
    }
    let (dir, name, _pool) = resolve_run(&args.run, "instance")?;
    let mut resolved = args.clone();
    resolved.run.out = Some(dir.clone());
    resolved.run.name = Some(name.clone());
    emit_config(&dir, &name, Command::Instance(resolved))?;

    let p = ((args.alpha * args.n as f64) + 0.5).floor() as usize;
    let rt = parse_correlation(&args.rt, args.n)?;
    let rr = parse_correlation(&args.rr, p)?;
    let prior = map_usage(SignalPrior::new(rho))?;
    let inst = map_usage(make_instance(
        prior,
        args.n,
        args.alpha,
        &rt,
        &rr,
        args.run.seed,
    ))?;
    let stem = Path::new(&dir).join(&name);
    formats::write_instance(&stem, &inst, &args.rt, &args.rr, args.run.seed)?;
    print_result(
        &args.run,
        &formats::InstanceMeta {
            schema: formats::INSTANCE_SCHEMA.to_string(),
            n: args.n,
            p,
            alpha: inst.alpha,
            rt: args.rt.clone(),
            rr: args.rr.clone(),
            seed: args.run.seed,
        },
        &format!(
            "instance written: {} (n={}, p={p}, alpha={})",
            stem.display(),
            args.n,
            inst.alpha
        ),
    );
    Ok(())
}

// ---- recover ----

#[derive(Debug, Serialize)]
struct RecoverOutput {
    schema: String,
    n: usize,
    p: usize,
    alpha: f64,
    rel_error: f64,
    success: bool,
    converged: bool,
    iters: usize,
    primal_residual: f64,
    dual_residual: f64,
    objective: f64,
}

pub fn recover(args: &RecoverArgs) -> CliResult<()> {
    let (dir, name, _pool) = resolve_run(&args.run, "recover")?;
    let mut resolved = args.clone();
    resolved.run.out = Some(dir.clone());
    resolved.run.name = Some(name.clone());
    emit_config(&dir, &name, Command::Recover(resolved))?;

    let inst = if let Some(stem) = &args.instance {
        let (inst, _meta) = formats::read_instance(Path::new(stem))?;
        inst
    } else {
        let n = args
            .n
            .ok_or_else(|| usage("--n required when not loading an instance"))?;
        let alpha = args
            .alpha
            .ok_or_else(|| usage("--alpha required when not loading an instance"))?;
        let rho = check_rho(
            args.rho
                .ok_or_else(|| usage("--rho required when not loading an instance"))?,
        )?;
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(usage(format!("alpha must lie in (0,1), got {alpha}")));
        }
        let p = ((alpha * n as f64) + 0.5).floor() as usize;
        let rt = parse_correlation(&args.rt, n)?;
        let rr = parse_correlation(&args.rr, p)?;
        let prior = map_usage(SignalPrior::new(rho))?;
        map_usage(make_instance(prior, n, alpha, &rt, &rr, args.run.seed))?
    };

    let params = BasisPursuitParams {
        max_iters: args.max_iters,
        ..BasisPursuitParams::default()
    };
    let res = basis_pursuit(&inst, &params).map_err(|e| failure(e.to_string()))?;
    let output = RecoverOutput {
        schema: "l1phase.recovery.v1".to_string(),
        n: inst.matrix.cols(),
        p: inst.matrix.rows(),
        alpha: inst.alpha,
        rel_error: res.rel_error,
        success: res.success,
        converged: res.converged,
        iters: res.iters,
        primal_residual: res.primal_residual,
        dual_residual: res.dual_residual,
        objective: res.objective,
    };
    formats::write_json(&out_path(&dir, &name, "recovery.json"), &output)?;
    print_result(
        &args.run,
        &output,
        &format!(
            "success={} rel_error={:.3e} iters={} converged={}",
            output.success, output.rel_error, output.iters, output.converged
        ),
    );
    Ok(())
}

// ---- rr-check ----

#[derive(Debug, Serialize)]
struct RrCheckOutput {
    schema: String,
    n: usize,
    rho: f64,
    r: f64,
    alpha: f64,
    trials: usize,
    seed: u64,
    arms: Vec<RrArmOutput>,
    pairwise_z: Vec<(usize, usize, f64)>,
    supported: bool,
}

#[derive(Debug, Serialize)]
struct RrArmOutput {
    label: String,
    trials: u32,
    successes: u32,
    fraction: f64,
}

pub fn rr_check(args: &RrCheckArgs) -> CliResult<()> {
    let rho = check_rho(args.rho)?;
    let r = check_r(args.r)?;
    if args.trials == 0 {
        return Err(usage("--trials must be positive".to_string()));
    }
    if args.rr_list.len() < 2 {
        return Err(usage("need at least two --rr arms to compare".to_string()));
    }
    if !(args.alpha > 0.0 && args.alpha < 1.0) {
        return Err(usage(format!("alpha must lie in (0,1), got {}", args.alpha)));
    }
    let (dir, name, pool) = resolve_run(&args.run, "rr-check")?;
    let mut resolved = args.clone();
    resolved.run.out = Some(dir.clone());
    resolved.run.name = Some(name.clone());
    emit_config(&dir, &name, Command::RrCheck(resolved))?;

    let specs: Vec<(String, l1phase_core::model::CorrelationFamily)> = args
        .rr_list
        .iter()
        .map(|s| parse_correlation_family(s).map(|fam| (s.clone(), fam)))
        .collect::<CliResult<_>>()?;
    let params = BasisPursuitParams::default();
    let report = rr_independence_check(
        args.n,
        rho,
        r,
        &specs,
        args.alpha,
        args.trials,
        args.run.seed,
        &params,
        &pool,
    )
    .map_err(|e| failure(e.to_string()))?;

    let output = RrCheckOutput {
        schema: "l1phase.rrcheck.v1".to_string(),
        n: args.n,
        rho,
        r,
        alpha: args.alpha,
        trials: args.trials,
        seed: args.run.seed,
        arms: report
            .arms
            .iter()
            .map(|a| RrArmOutput {
                label: a.label.clone(),
                trials: a.trials,
                successes: a.successes,
                fraction: a.fraction,
            })
            .collect(),
        pairwise_z: report.pairwise_z.clone(),
        supported: report.supported,
    };
    formats::write_json(&out_path(&dir, &name, "rrcheck.json"), &output)?;
    let mut text = String::new();
    for a in &output.arms {
        text.push_str(&format!(
            "{}: {}/{} = {:.4}\n",
            a.label, a.successes, a.trials, a.fraction
        ));
    }
    text.push_str(&format!(
        "independence supported at 3 sigma: {}",
        output.supported
    ));
    print_result(&args.run, &output, &text);
    Ok(())
}

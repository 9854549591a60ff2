//! Implementations of the five subcommands. Outputs are fully buffered and
//! written at the end of each command, so failures never leave partially
//! written files behind.

use std::fs::File;
use std::io::{self, BufRead, BufWriter, Write};
use std::path::Path;
use std::sync::Arc;

use anyhow::{bail, Context};
use nalgebra::DVector;
use serde::Serialize;

use dikin::applications::{
    anneal_minimize, AnnealOptions, DriftOptions, DriftPolicy, DriftTracker, ExpFamilyModel,
    PosteriorOptions, PosteriorTracker, PredictorOptions, PredictorState,
};
use dikin::diagnostics::{
    detailed_balance_check, grid_density, grid_minimize_linear, tv_distance,
    self_concordance_check, GridOracle,
};
use dikin::potentials::{step_size, Potential};
use dikin::report::{write_json_line, CsvSink};
use dikin::tracker::{Policy, RoundReport};
use dikin::walker::{run_with_sink, ChainParams, ChainState};

use crate::config::RunConfig;
use crate::{AnnealArgs, DiagnoseArgs, PredictArgs, SampleArgs, TrackArgs};

pub fn sample(args: SampleArgs) -> anyhow::Result<()> {
    let cfg = RunConfig::load(&args.common.config)?;
    let seed = cfg.seed(args.common.seed)?;
    let steps = args
        .steps
        .or(cfg.steps)
        .context("no step count given: set `steps` in the config or pass --steps")?;
    let barrier = cfg.barrier.build()?;
    let d = barrier.dim();
    let potential = match &cfg.potential {
        Some(p) => p.build(d)?,
        None => Potential::uniform(),
    };
    let r = step_size(&potential, d)?;
    let chains = args.chains.max(1);
    let workers = args.workers.max(1);

    let mut runs: Vec<(ChainState, Vec<DVector<f64>>)> = Vec::with_capacity(chains as usize);
    let chain_ids: Vec<u64> = (0..chains).collect();
    for batch in chain_ids.chunks(workers) {
        let mut batch_runs = std::thread::scope(|scope| {
            let handles: Vec<_> = batch
                .iter()
                .map(|&i| {
                    let barrier = Arc::clone(&barrier);
                    let potential = potential.clone();
                    scope.spawn(move || -> dikin::Result<(ChainState, Vec<DVector<f64>>)> {
                        let params = ChainParams::new(r, seed)?.with_stream(i);
                        let mut state = ChainState::from_center(barrier.as_ref(), &params)?;
                        let mut samples = Vec::with_capacity(steps as usize);
                        run_with_sink(barrier.as_ref(), &potential, &params, &mut state, steps, |st| {
                            samples.push(st.current().clone())
                        })?;
                        Ok((state, samples))
                    })
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("chain worker panicked"))
                .collect::<dikin::Result<Vec<_>>>()
        })?;
        runs.append(&mut batch_runs);
    }

    // Outputs merged deterministically by chain index.
    let with_chain = chains > 1;
    let mut sink = CsvSink::new(BufWriter::new(
        File::create(&args.out).with_context(|| format!("cannot create {}", args.out.display()))?,
    ));
    for (i, (state, _)) in runs.iter().enumerate() {
        let label = with_chain.then_some(i as u64);
        sink.chain_header(label, seed, i as u64, r, state)?;
    }
    sink.columns(d, with_chain)?;
    for (i, (_, samples)) in runs.iter().enumerate() {
        let label = with_chain.then_some(i as u64);
        for x in samples {
            sink.row(label, x)?;
        }
    }
    sink.flush()?;

    let pooled: Vec<DVector<f64>> = runs.iter().flat_map(|(_, s)| s.iter().cloned()).collect();
    let (mean, covariance) = if pooled.len() >= 2 {
        let (m, c) = dikin::diagnostics::empirical_moments(&pooled)?;
        (
            Some(m.iter().copied().collect::<Vec<f64>>()),
            Some((0..d).map(|i| (0..d).map(|j| c[(i, j)]).collect()).collect::<Vec<Vec<f64>>>()),
        )
    } else {
        (None, None)
    };
    let (tv_vs_oracle, oracle_bins) = if d <= 2 && pooled.len() >= 1_000 {
        let oracle = grid_density(barrier.as_ref(), &potential, cfg.oracle.h)?;
        let coarse = coarsen_to(oracle, cfg.oracle.max_bins, d)?;
        let bins = coarse.cells();
        if let Some(path) = &args.curve {
            // TV of growing sample prefixes at logarithmic checkpoints.
            let mut sink = CsvSink::new(BufWriter::new(
                File::create(path).with_context(|| format!("cannot create {}", path.display()))?,
            ));
            sink.comment(&format!("command=sample curve=tv_vs_steps seed={seed}"))?;
            sink.columns_named(&["steps".into(), "tv".into()])?;
            let mut checkpoint = 1_000usize;
            while checkpoint < pooled.len() {
                sink.values_row(&[
                    checkpoint as f64,
                    tv_distance(&coarse, &pooled[..checkpoint])?,
                ])?;
                checkpoint *= 10;
            }
            sink.values_row(&[pooled.len() as f64, tv_distance(&coarse, &pooled)?])?;
            sink.flush()?;
        }
        (Some(tv_distance(&coarse, &pooled)?), Some(bins))
    } else {
        if args.curve.is_some() {
            bail!("--curve needs a 1D/2D body and at least 10³ samples");
        }
        (None, None)
    };

    #[derive(Serialize)]
    struct SampleSummary {
        command: &'static str,
        seed: u64,
        steps: u64,
        chains: u64,
        r: f64,
        acceptance_rate: Vec<f64>,
        lazy_fraction: Vec<f64>,
        #[serde(skip_serializing_if = "Option::is_none")]
        mean: Option<Vec<f64>>,
        #[serde(skip_serializing_if = "Option::is_none")]
        covariance: Option<Vec<Vec<f64>>>,
        #[serde(skip_serializing_if = "Option::is_none")]
        tv_vs_oracle: Option<f64>,
        #[serde(skip_serializing_if = "Option::is_none")]
        oracle_bins: Option<usize>,
    }
    let summary = SampleSummary {
        command: "sample",
        seed,
        steps,
        chains,
        r,
        acceptance_rate: runs.iter().map(|(s, _)| s.acceptance_rate()).collect(),
        lazy_fraction: runs.iter().map(|(s, _)| s.lazy_fraction()).collect(),
        mean,
        covariance,
        tv_vs_oracle,
        oracle_bins,
    };
    write_json_line(&mut io::stdout().lock(), &summary)?;
    Ok(())
}

/// Coarsens an oracle until it fits the comparison-bin budget.
fn coarsen_to(oracle: GridOracle, max_bins: usize, dim: usize) -> dikin::Result<GridOracle> {
    let per_axis_target = match dim {
        1 => max_bins.max(1),
        _ => (max_bins as f64).sqrt().floor() as usize,
    }
    .max(1);
    let n = oracle.cells_per_axis()[0];
    let factor = n.div_ceil(per_axis_target);
    if factor <= 1 {
        Ok(oracle)
    } else {
        oracle.coarsen(factor)
    }
}

#[derive(Serialize)]
struct BurnInReport {
    t: u64,
    seed: u64,
    burn_in_steps: u64,
}

pub fn track(args: TrackArgs) -> anyhow::Result<()> {
    let cfg = RunConfig::load(&args.common.config)?;
    let seed = cfg.seed(args.common.seed)?;
    let c = cfg.constant_c(args.common.constant_c);
    let barrier = cfg.barrier.build()?;
    let d = barrier.dim();
    let model = cfg.model.as_ref().context("track needs a [model] block in the config")?;
    let rounds_input = parse_vectors(&args.stream, d)?;
    let eps = cfg.tracker.eps;
    let warm_bound = model.warm_bound.unwrap_or(100.0);

    let mut reports: Vec<RoundReport> = Vec::with_capacity(rounds_input.len());
    let mut samples: Vec<DVector<f64>> = Vec::with_capacity(rounds_input.len());
    let burn_in_steps;
    match model.kind.as_str() {
        "gaussian_posterior" => {
            let mut family = ExpFamilyModel::gaussian_natural(d, model.kappa2.unwrap_or(0.0))?;
            if let Some(l) = model.lipschitz_l {
                family = family.with_lipschitz(l);
            }
            if let Some(lambda) = model.lambda_max {
                family = family.with_lambda_max(lambda);
            }
            let opts = PosteriorOptions {
                eps,
                seed,
                c,
                warm_bound,
                sup_samples: model.sup_samples.unwrap_or(2_048),
            };
            let mut tracker = PosteriorTracker::new(barrier, family, opts)?;
            burn_in_steps = tracker.burn_in_steps();
            for y in &rounds_input {
                let report = tracker.ingest(y)?;
                samples.push(tracker.current().clone());
                reports.push(report);
            }
        }
        "drift" => {
            let radius = model
                .drift_radius
                .context("model.drift_radius is required for drift tracking")?;
            let initial = model
                .initial_center
                .as_ref()
                .map(|v| DVector::from_vec(v.clone()))
                .unwrap_or_else(|| DVector::zeros(d));
            let policy = match cfg.tracker.policy()? {
                Policy::OneStep => DriftPolicy::OneStep,
                Policy::Accuracy => DriftPolicy::Accuracy,
            };
            let opts = DriftOptions {
                policy,
                eps,
                drift_radius: radius,
                max_drift: model.max_drift,
                seed,
                c,
                warm_bound,
            };
            let mut tracker = DriftTracker::new(barrier, initial, opts)?;
            burn_in_steps = tracker.burn_in_steps();
            for center in rounds_input {
                let (x, report) = tracker.advance_to(center)?;
                samples.push(x);
                reports.push(report);
            }
        }
        other => bail!("model.kind: unknown driver `{other}` (expected gaussian_posterior | drift)"),
    }

    let mut report_out = open_writer(args.report.as_deref())?;
    write_json_line(&mut report_out, &BurnInReport { t: 0, seed, burn_in_steps })?;
    for report in &reports {
        write_json_line(&mut report_out, report)?;
    }
    report_out.flush()?;

    if let Some(path) = &args.out {
        let mut sink = CsvSink::new(BufWriter::new(
            File::create(path).with_context(|| format!("cannot create {}", path.display()))?,
        ));
        sink.comment(&format!("command=track seed={seed} rounds={}", samples.len()))?;
        sink.columns(d, false)?;
        for x in &samples {
            sink.row(None, x)?;
        }
        sink.flush()?;
    }
    Ok(())
}

pub fn anneal(args: AnnealArgs) -> anyhow::Result<()> {
    let cfg = RunConfig::load(&args.common.config)?;
    let seed = cfg.seed(args.common.seed)?;
    let block = cfg.anneal.as_ref().context("anneal needs an [anneal] block in the config")?;
    let barrier = cfg.barrier.build()?;
    let opts = AnnealOptions {
        seed,
        c: cfg.constant_c(args.common.constant_c),
        warm_bound: block.warm_bound.unwrap_or(100.0),
    };
    let report = anneal_minimize(
        barrier.as_ref(),
        DVector::from_vec(block.direction.clone()),
        block.eps,
        &opts,
    )?;
    write_json_line(
        &mut io::stdout().lock(),
        &serde_json::json!({"command": "anneal", "seed": seed, "report": report}),
    )?;
    Ok(())
}

pub fn predict(args: PredictArgs) -> anyhow::Result<()> {
    let cfg = RunConfig::load(&args.common.config)?;
    let seed = cfg.seed(args.common.seed)?;
    let block = cfg.predict.as_ref().context("predict needs a [predict] block in the config")?;
    let barrier = cfg.barrier.build()?;
    let d = barrier.dim();
    let losses = parse_vectors(&args.stream, d)?;
    let opts = PredictorOptions {
        horizon: block.horizon,
        eta: block.eta,
        bounded: block.bounded,
        seed,
        c: cfg.constant_c(args.common.constant_c),
        eps: cfg.tracker.eps,
        warm_bound: block.warm_bound.unwrap_or(100.0),
    };
    let mut state = PredictorState::new(Arc::clone(&barrier), opts)?;
    let mut decisions: Vec<(DVector<f64>, f64)> = Vec::with_capacity(losses.len());
    for loss in &losses {
        let (decision, _) = state.round(loss)?;
        let realized = loss.dot(&decision);
        decisions.push((decision, realized));
    }

    // Grid-exact best fixed comparator (cumulative loss is linear).
    let cells = ((2.0 * barrier.enclosing_radius()) / cfg.oracle.h).ceil() as usize;
    let comparator = if d <= 2 && !losses.is_empty() {
        let (point, total) = grid_minimize_linear(barrier.as_ref(), state.loss_sum(), cells.max(1))?;
        Some((point, total))
    } else {
        None
    };

    if let Some(path) = &args.curve {
        if d > 2 {
            bail!("--curve needs a 1D/2D body for the grid comparator");
        }
        // Cumulative realized loss and best-fixed comparator per prefix.
        let mut sink = CsvSink::new(BufWriter::new(
            File::create(path).with_context(|| format!("cannot create {}", path.display()))?,
        ));
        sink.comment(&format!("command=predict curve=regret_vs_rounds seed={seed}"))?;
        sink.columns_named(&[
            "t".into(),
            "cumulative_realized".into(),
            "comparator".into(),
            "regret".into(),
        ])?;
        let mut prefix_sum = DVector::zeros(d);
        let mut cumulative = 0.0;
        for (t, (loss, (_, realized))) in losses.iter().zip(&decisions).enumerate() {
            prefix_sum += loss;
            cumulative += realized;
            let (_, best) = grid_minimize_linear(barrier.as_ref(), &prefix_sum, cells.max(1))?;
            sink.values_row(&[(t + 1) as f64, cumulative, best, cumulative - best])?;
        }
        sink.flush()?;
    }

    if let Some(path) = &args.out {
        let mut sink = CsvSink::new(BufWriter::new(
            File::create(path).with_context(|| format!("cannot create {}", path.display()))?,
        ));
        sink.comment(&format!("command=predict seed={seed} eta={} rounds={}", state.eta(), decisions.len()))?;
        let mut cols: Vec<String> = (1..=d).map(|i| format!("x_{i}")).collect();
        cols.push("realized_loss".into());
        sink.columns_named(&cols)?;
        for (x, realized) in &decisions {
            let mut values: Vec<f64> = x.iter().copied().collect();
            values.push(*realized);
            sink.values_row(&values)?;
        }
        sink.flush()?;
    }

    #[derive(Serialize)]
    struct PredictSummary {
        command: &'static str,
        seed: u64,
        rounds: usize,
        eta: f64,
        realized_total: f64,
        #[serde(skip_serializing_if = "Option::is_none")]
        comparator_total: Option<f64>,
        #[serde(skip_serializing_if = "Option::is_none")]
        comparator_point: Option<Vec<f64>>,
        #[serde(skip_serializing_if = "Option::is_none")]
        regret: Option<f64>,
    }
    let summary = PredictSummary {
        command: "predict",
        seed,
        rounds: decisions.len(),
        eta: state.eta(),
        realized_total: state.realized_total(),
        comparator_total: comparator.as_ref().map(|(_, v)| *v),
        comparator_point: comparator.as_ref().map(|(p, _)| p.iter().copied().collect()),
        regret: comparator.as_ref().map(|(_, v)| state.realized_total() - v),
    };
    write_json_line(&mut io::stdout().lock(), &summary)?;
    Ok(())
}

pub fn diagnose(args: DiagnoseArgs) -> anyhow::Result<()> {
    let cfg = RunConfig::load(&args.common.config)?;
    let seed = cfg.seed(args.common.seed)?;
    let barrier = cfg.barrier.build()?;
    let d = barrier.dim();
    let mut out = io::stdout().lock();
    let mut all_pass = true;

    let sc = self_concordance_check(barrier.as_ref(), args.trials, seed)?;
    let geometry_checks = [
        ("dikin_containment", sc.dikin_violations == 0, sc.dikin_violations as f64),
        ("third_derivative_aligned", sc.worst_aligned_third <= 1.05, sc.worst_aligned_third),
        ("third_derivative_trilinear", sc.worst_trilinear <= 1.05, sc.worst_trilinear),
        ("gradient_bound", sc.worst_gradient_sq <= 1.0 + 1e-9, sc.worst_gradient_sq),
        (
            "hessian_sandwich",
            sc.sandwich_lower >= 1.0 - 1e-6 && sc.sandwich_upper <= 1.0 + 1e-6,
            sc.sandwich_lower.min(2.0 - sc.sandwich_upper),
        ),
    ];
    for (name, pass, value) in geometry_checks {
        all_pass &= pass;
        write_json_line(
            &mut out,
            &serde_json::json!({"check": name, "pass": pass, "value": value, "trials": args.trials}),
        )?;
    }

    let mut balance_targets: Vec<(String, Potential)> = vec![
        ("uniform".into(), Potential::uniform()),
        ("linear".into(), {
            let mut b = DVector::zeros(d);
            b[0] = 0.5;
            Potential::linear(b, 0.0)
        }),
        ("quadratic".into(), Potential::gaussian(DVector::zeros(d))),
    ];
    if let Some(p) = &cfg.potential {
        balance_targets.push(("configured".into(), p.build(d)?));
    }
    for (name, potential) in &balance_targets {
        let r = step_size(potential, d)?;
        let worst = detailed_balance_check(barrier.as_ref(), potential, r, args.trials, seed)?;
        let pass = worst <= 1e-10;
        all_pass &= pass;
        write_json_line(
            &mut out,
            &serde_json::json!({
                "check": "detailed_balance", "potential": name, "r": r,
                "worst_violation": worst, "pass": pass, "trials": args.trials
            }),
        )?;
    }

    out.flush()?;
    if !all_pass {
        bail!("diagnostics failed");
    }
    Ok(())
}

fn open_writer(path: Option<&Path>) -> anyhow::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("cannot create {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout())),
    })
}

/// Reads a CSV stream of d-vectors from a file or stdin (`-`). Blank lines
/// and `#` comments are skipped; malformed lines are reported with their
/// line number.
fn parse_vectors(spec: &str, d: usize) -> anyhow::Result<Vec<DVector<f64>>> {
    let reader: Box<dyn BufRead> = if spec == "-" {
        Box::new(io::BufReader::new(io::stdin()))
    } else {
        Box::new(io::BufReader::new(
            File::open(spec).with_context(|| format!("cannot open stream {spec}"))?,
        ))
    };
    let mut out = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        let line = line.with_context(|| format!("stream line {lineno}: read failure"))?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let values: Vec<f64> = trimmed
            .split(',')
            .map(|tok| {
                tok.trim()
                    .parse::<f64>()
                    .with_context(|| format!("stream line {lineno}: bad number `{}`", tok.trim()))
            })
            .collect::<anyhow::Result<_>>()?;
        if values.len() != d {
            bail!("stream line {lineno}: expected {d} values, found {}", values.len());
        }
        out.push(DVector::from_vec(values));
    }
    Ok(out)
}

//! Lambda sweeps: one fit per lambda with a shared seed, tabulated as CSV.

use crate::fit::{execute, resolve, Job};
use crate::{CliError, SweepArgs};
use std::io::Write;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

struct Row {
    lambda: f64,
    /// Clustering error and final loss, or None when the fit failed.
    values: Option<(f64, f64)>,
    wall_seconds: f64,
}

pub fn cmd_sweep(args: &SweepArgs) -> Result<(), CliError> {
    let lambdas = lambda_points(args)?;
    let job = resolve(&args.shared, Some(job_placeholder_lambda(&lambdas)))?;
    let workers = worker_count(args.parallel, lambdas.len());

    let rows = if workers <= 1 {
        lambdas.iter().map(|&l| run_one(&job, l)).collect()
    } else {
        run_parallel(&job, &lambdas, workers)
    };

    if let Some(dir) = args.out.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir)?;
        }
    }
    let mut out = std::io::BufWriter::new(std::fs::File::create(&args.out)?);
    writeln!(out, "lambda,clustering_error,final_loss,wall_seconds")?;
    for row in &rows {
        match row.values {
            Some((error, final_loss)) => writeln!(
                out,
                "{},{},{},{}",
                row.lambda, error, final_loss, row.wall_seconds
            )?,
            None => writeln!(out, "{},error,error,{}", row.lambda, row.wall_seconds)?,
        }
    }
    out.flush()?;
    println!("wrote {} rows to {}", rows.len(), args.out.display());
    Ok(())
}

/// The resolved job needs some lambda even though each run overrides it.
fn job_placeholder_lambda(lambdas: &[f64]) -> f64 {
    lambdas.first().copied().unwrap_or(1.0)
}

fn run_one(job: &Job, lambda: f64) -> Row {
    let started = Instant::now();
    match execute(job, lambda) {
        Ok(outcome) => Row {
            lambda,
            values: Some((outcome.clustering_error, outcome.final_loss)),
            wall_seconds: outcome.wall_seconds,
        },
        Err(err) => {
            log::warn!("lambda {lambda}: {} ({err})", err.name());
            Row {
                lambda,
                values: None,
                wall_seconds: started.elapsed().as_secs_f64(),
            }
        }
    }
}

fn run_parallel(job: &Job, lambdas: &[f64], workers: usize) -> Vec<Row> {
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<Row>>> = lambdas.iter().map(|_| Mutex::new(None)).collect();
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= lambdas.len() {
                    break;
                }
                let row = run_one(job, lambdas[i]);
                *slots[i].lock().expect("row slot poisoned") = Some(row);
            });
        }
    });
    slots
        .into_iter()
        .map(|slot| {
            slot.into_inner()
                .expect("row slot poisoned")
                .expect("every index was claimed by a worker")
        })
        .collect()
}

fn worker_count(requested: usize, jobs: usize) -> usize {
    let cap = std::env::var("SUBSPACEKIT_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&v| v > 0)
        .unwrap_or(usize::MAX);
    requested.max(1).min(cap).min(jobs.max(1))
}

fn lambda_points(args: &SweepArgs) -> Result<Vec<f64>, CliError> {
    let lambdas = match (&args.lambda_list, &args.lambda_range) {
        (Some(list), None) => list.clone(),
        (None, Some(range)) => parse_range(range)?,
        (Some(_), Some(_)) => {
            return Err(CliError::InvalidFlag(
                "--lambda-list and --lambda-range are mutually exclusive".into(),
            ))
        }
        (None, None) => {
            return Err(CliError::InvalidFlag(
                "one of --lambda-list or --lambda-range is required".into(),
            ))
        }
    };
    if lambdas.is_empty() {
        return Err(CliError::InvalidFlag("no lambda values given".into()));
    }
    if lambdas.iter().any(|l| !(l.is_finite() && *l > 0.0)) {
        return Err(CliError::InvalidFlag(
            "lambda values must be finite and positive".into(),
        ));
    }
    Ok(lambdas)
}

/// Parses `start:end:xFACTOR`, a geometric progression inclusive of `end`
/// (up to a relative rounding slack of 1e-9).
fn parse_range(range: &str) -> Result<Vec<f64>, CliError> {
    let bad = |msg: &str| CliError::InvalidFlag(format!("--lambda-range {range:?}: {msg}"));
    let parts: Vec<&str> = range.split(':').collect();
    let [start, end, step] = parts.as_slice() else {
        return Err(bad("expected start:end:xFACTOR"));
    };
    let start: f64 = start.parse().map_err(|_| bad("bad start value"))?;
    let end: f64 = end.parse().map_err(|_| bad("bad end value"))?;
    let factor: f64 = step
        .strip_prefix('x')
        .ok_or_else(|| bad("step must look like x10"))?
        .parse()
        .map_err(|_| bad("bad step factor"))?;
    if !(start > 0.0 && end >= start && factor > 1.0) {
        return Err(bad("need 0 < start <= end and factor > 1"));
    }
    let mut points = Vec::new();
    let mut value = start;
    while value <= end * (1.0 + 1e-9) {
        points.push(value);
        value *= factor;
    }
    Ok(points)
}

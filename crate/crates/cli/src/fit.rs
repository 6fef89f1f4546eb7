//! The shared fit engine: resolve flags into a runnable job, execute it,
//! and serialize the report.

use crate::presets::{defaults, PresetDefaults};
use crate::{CliError, FitArgs, FitShared};
use serde::Serialize;
use std::path::Path;
use std::time::Instant;
use subspacekit::evaldata::{clustering_error, load_labels, load_matrix};
use subspacekit::linalg::Matrix;
use subspacekit::neuralnet::{init_params, load_checkpoint, preset, preset_names, Parameters};
use subspacekit::pipeline::{
    fit_dcfsc_from, fit_dsc_baseline_from, pretrain_from, write_training_log, Method,
    NumericWidth, TrainConfig,
};
use subspacekit::selfexpress::{self_expression_residual, solve_self_expression};
use subspacekit::spectral::{cluster_from_coefficients, ClusterConfig};
use subspacekit::NetworkSpec;

/// Report written for every fit: one stable-order JSON object.
#[derive(Debug, Serialize)]
pub struct RunReport {
    pub method: &'static str,
    /// Closed-form regularization weight; null for the baseline method,
    /// which has no such parameter.
    pub lambda: Option<f64>,
    pub epochs: usize,
    pub seed: u64,
    pub clustering_error: f64,
    /// Path of the tab-separated per-epoch training log.
    pub loss_history: String,
    pub wall_seconds: f64,
    pub param_total: usize,
}

/// A fully resolved job: everything `execute` needs, flag handling done.
pub struct Job {
    pub method: Method,
    pub data: Matrix,
    pub truth: Vec<usize>,
    pub arch: Option<NetworkSpec>,
    pub lambda: f64,
    pub config: TrainConfig,
    pub cluster_k: usize,
    pub rho: f64,
    pub init: Option<Parameters>,
    pub no_pretrain: bool,
    pub pretrain_epochs: usize,
}

pub struct Outcome {
    pub clustering_error: f64,
    pub labels: Vec<usize>,
    pub loss_history: Vec<f64>,
    pub epoch_seconds: Vec<f64>,
    pub final_loss: f64,
    pub param_total: usize,
    pub wall_seconds: f64,
}

/// Loads an architecture by preset name or JSON file path.
pub fn load_arch(arch: &str) -> Result<(NetworkSpec, Option<PresetDefaults>), CliError> {
    if let Some(spec) = preset(arch) {
        return Ok((spec, defaults(arch)));
    }
    let path = Path::new(arch);
    if !path.exists() {
        return Err(CliError::UnknownPreset(
            arch.to_string(),
            preset_names().join(", "),
        ));
    }
    let text = std::fs::read_to_string(path)?;
    let spec: NetworkSpec = serde_json::from_str(&text)
        .map_err(|e| CliError::BadArchFile(path.to_path_buf(), e.to_string()))?;
    spec.validate()
        .map_err(|e| CliError::BadArchFile(path.to_path_buf(), e.to_string()))?;
    Ok((spec, None))
}

pub fn resolve(shared: &FitShared, lambda_flag: Option<f64>) -> Result<Job, CliError> {
    let method = shared.method.into_method();
    let data = load_matrix(&shared.data)?;
    let truth = load_labels(&shared.labels)?;

    let (arch, preset_defaults) = match (&shared.arch, method) {
        (Some(arch), _) => {
            let (spec, defaults) = load_arch(arch)?;
            let spec = match method {
                Method::Shallow => None, // defaults still apply
                _ => Some(spec),
            };
            (spec, defaults)
        }
        (None, Method::Shallow) => (None, None),
        (None, Method::Dcfsc) => return Err(CliError::MissingArch("dcfsc")),
        (None, Method::Dsc) => return Err(CliError::MissingArch("dsc")),
    };

    let lambda = match lambda_flag.or(preset_defaults.map(|d| d.lambda)) {
        Some(l) => l,
        None => match method {
            Method::Dcfsc => return Err(CliError::MissingLambda("dcfsc")),
            Method::Shallow => return Err(CliError::MissingLambda("shallow")),
            // the baseline objective has no closed-form weight; the value
            // is carried but unused
            Method::Dsc => 1.0,
        },
    };
    let cluster_k = shared
        .k
        .or(preset_defaults.map(|d| d.k))
        .ok_or(CliError::MissingK)?;
    let numeric_width = match shared.width {
        32 => NumericWidth::W32,
        64 => NumericWidth::W64,
        other => {
            return Err(CliError::InvalidFlag(format!(
                "--width must be 32 or 64, got {other}"
            )))
        }
    };
    let config = TrainConfig {
        lambda,
        lambda1: shared
            .lambda1
            .or(preset_defaults.map(|d| d.lambda1))
            .unwrap_or(1.0),
        lambda2: shared
            .lambda2
            .or(preset_defaults.map(|d| d.lambda2))
            .unwrap_or(1.0),
        learning_rate: shared
            .lr
            .or(preset_defaults.map(|d| d.learning_rate))
            .unwrap_or(1e-3),
        epochs: shared
            .epochs
            .or(preset_defaults.map(|d| d.epochs))
            .unwrap_or(200),
        seed: shared.seed,
        numeric_width,
        squared_theta_penalty: true,
    };

    let init = match &shared.init {
        Some(path) => Some(load_checkpoint(path)?),
        None => None,
    };
    Ok(Job {
        method,
        data,
        truth,
        arch,
        lambda,
        config,
        cluster_k,
        rho: shared.rho,
        init,
        no_pretrain: shared.no_pretrain,
        pretrain_epochs: shared.pretrain_epochs,
    })
}

/// Runs a job at a given lambda (overriding the resolved one, which lets a
/// sweep reuse one resolved job).
pub fn execute(job: &Job, lambda: f64) -> Result<Outcome, CliError> {
    let started = Instant::now();
    let config = TrainConfig {
        lambda,
        ..job.config.clone()
    };
    let (coefficient, loss_history, epoch_seconds, final_loss, param_total) = match job.method {
        Method::Shallow => {
            let b = solve_self_expression(&job.data, lambda)?;
            let residual = self_expression_residual(&job.data, &b)?;
            (b, Vec::new(), Vec::new(), residual, 0)
        }
        Method::Dcfsc | Method::Dsc => {
            let spec = job.arch.as_ref().expect("resolve enforces --arch");
            if job.method == Method::Dsc {
                if let Some(idx) = spec.self_expressive_index() {
                    if let subspacekit::LayerSpec::SelfExpressive { n } = spec.layers[idx] {
                        if n != job.data.rows() {
                            return Err(CliError::InvalidFlag(format!(
                                "architecture's coefficient block is sized for {n} samples, \
                                 data has {}",
                                job.data.rows()
                            )));
                        }
                    }
                }
            }
            let params = match &job.init {
                Some(p) => {
                    let seeded = init_params(spec, config.seed)
                        .map_err(subspacekit::pipeline::PipelineError::from)?;
                    if !p.same_shape_as(&seeded) {
                        return Err(CliError::InvalidFlag(
                            "--init checkpoint does not match the architecture".into(),
                        ));
                    }
                    p.clone()
                }
                None => init_params(spec, config.seed)
                    .map_err(subspacekit::pipeline::PipelineError::from)?,
            };
            let params = if job.no_pretrain {
                params
            } else {
                let pre_config = TrainConfig {
                    epochs: job.pretrain_epochs,
                    ..config.clone()
                };
                pretrain_from(spec, params, &job.data, &pre_config)?
            };
            let fit = match job.method {
                Method::Dcfsc => fit_dcfsc_from(spec, params, &job.data, &config)?,
                Method::Dsc => fit_dsc_baseline_from(spec, params, &job.data, &config)?,
                Method::Shallow => unreachable!(),
            };
            let final_loss = fit.loss_history.last().copied().unwrap_or(f64::NAN);
            (
                fit.coefficient,
                fit.loss_history,
                fit.epoch_seconds,
                final_loss,
                spec.param_total(),
            )
        }
    };
    let cluster_config = ClusterConfig {
        k: job.cluster_k,
        threshold_ratio: job.rho,
        seed: job.config.seed,
        ..ClusterConfig::default()
    };
    let labels = cluster_from_coefficients(&coefficient, &cluster_config)?;
    let error = clustering_error(&labels, &job.truth)?;
    Ok(Outcome {
        clustering_error: error,
        labels,
        loss_history,
        epoch_seconds,
        final_loss,
        param_total,
        wall_seconds: started.elapsed().as_secs_f64(),
    })
}

pub fn cmd_fit(args: &FitArgs) -> Result<(), CliError> {
    let job = resolve(&args.shared, args.lambda)?;
    let outcome = execute(&job, job.lambda)?;

    let stem = args
        .report
        .file_stem()
        .and_then(|s| s.to_str())
        .ok_or_else(|| CliError::InvalidFlag("--report needs a file name".into()))?
        .to_string();
    let dir = args.report.parent().unwrap_or_else(|| Path::new("."));
    std::fs::create_dir_all(dir)?;
    let log_path = dir.join(format!("{stem}.log"));
    let labels_path = dir.join(format!("{stem}.labels.csv"));

    write_training_log(&log_path, &outcome.loss_history, &outcome.epoch_seconds)?;
    subspacekit::evaldata::save_labels(&labels_path, &outcome.labels)?;

    let report = RunReport {
        method: job.method.as_str(),
        lambda: match job.method {
            Method::Dsc => None,
            _ => Some(job.lambda),
        },
        epochs: match job.method {
            Method::Shallow => 0,
            _ => job.config.epochs,
        },
        seed: job.config.seed,
        clustering_error: outcome.clustering_error,
        loss_history: log_path.display().to_string(),
        wall_seconds: outcome.wall_seconds,
        param_total: outcome.param_total,
    };
    let json = serde_json::to_string_pretty(&report).expect("report serializes");
    std::fs::write(&args.report, format!("{json}\n"))?;
    println!("{json}");
    Ok(())
}

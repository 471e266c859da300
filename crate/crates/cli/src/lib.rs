//! Library side of the `spp` binary: argument handling, the three run modes
//! and CSV output.
//!
//! Every output file starts with one `#` comment line carrying the creation
//! time, followed by a CSV header row. Floats are written in scientific
//! notation with 17 significant digits so they parse back bit-exactly.

pub mod config;
pub mod pattern;

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

use spp_core::{
    cv_path, fit, lambda_max, load_dataset, make_grid, path_2d, select_hyperparams, CvResult, Dataset, FitReport,
    FoldPlan, Hyperparams, ReferenceSolution,
};
use thiserror::Error;

use crate::config::{CommandKind, FoldSpec, RunConfig};
use crate::pattern::format_pattern;

pub const COEFFICIENTS_FILE: &str = "coefficients.csv";
pub const PATH_REPORT_FILE: &str = "path_report.csv";
pub const CV_REPORT_FILE: &str = "cv_report.csv";

/// Pattern column text of the intercept row in `coefficients.csv`.
pub const INTERCEPT_LABEL: &str = "(intercept)";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Module(spp_core::Error),

    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Module(_) | CliError::Io { .. } => 1,
        }
    }
}

impl From<spp_core::Error> for CliError {
    fn from(e: spp_core::Error) -> Self {
        match e {
            spp_core::Error::InvalidHyperparams(m) | spp_core::Error::InvalidGrid(m) => CliError::Config(m),
            other => CliError::Module(other),
        }
    }
}

/// One solved cell as it appears in the reports.
#[derive(Clone, Copy)]
struct Row<'a> {
    fold: usize,
    lambda_index: usize,
    kappa_index: usize,
    solution: &'a ReferenceSolution,
    report: &'a FitReport,
    wall_time: Option<Duration>,
}

/// Runs the configured command and writes its output files into `config.out`.
pub fn run(config: &RunConfig) -> Result<(), CliError> {
    let dataset = load_dataset(&config.input, config.structure, config.task())?;
    let lmax = lambda_max(&dataset, config.loss, config.hyperparams.max_len);
    log::info!("loaded {} instances, lambda_max = {lmax:e}", dataset.n());
    fs::create_dir_all(&config.out).map_err(|source| CliError::Io {
        path: config.out.clone(),
        source,
    })?;
    match config.command {
        CommandKind::Fit => run_fit(config, &dataset, lmax),
        CommandKind::Path => run_path(config, &dataset, lmax),
        CommandKind::Cv => run_cv(config, &dataset, lmax),
    }
}

fn run_fit(config: &RunConfig, dataset: &Dataset, lmax: f64) -> Result<(), CliError> {
    let lambda = config.lambda_ratio * lmax;
    let mut fits = Vec::with_capacity(config.kappas.len());
    for &kappa in &config.kappas {
        let hp = Hyperparams {
            lambda,
            kappa,
            ..config.hyperparams.clone()
        };
        hp.validate()?;
        let start = Instant::now();
        let out = fit(dataset, config.loss, &hp, &[])?;
        fits.push((out, start.elapsed()));
    }
    let rows: Vec<Row> = fits
        .iter()
        .enumerate()
        .map(|(kp, (out, wall))| Row {
            fold: 0,
            lambda_index: 0,
            kappa_index: kp,
            solution: &out.solution,
            report: &out.report,
            wall_time: Some(*wall),
        })
        .collect();
    write_outputs(config, dataset, &rows)
}

fn run_path(config: &RunConfig, dataset: &Dataset, lmax: f64) -> Result<(), CliError> {
    let grid = make_grid(lmax, config.lambda_count, config.lambda_ratio, &config.kappas)?;
    let path = path_2d(dataset, config.loss, &grid, &config.hyperparams)?;
    let rows: Vec<Row> = path
        .cells
        .iter()
        .map(|c| Row {
            fold: 0,
            lambda_index: c.k,
            kappa_index: c.kp,
            solution: &c.solution,
            report: &c.report,
            wall_time: Some(c.wall_time),
        })
        .collect();
    write_outputs(config, dataset, &rows)
}

fn run_cv(config: &RunConfig, dataset: &Dataset, lmax: f64) -> Result<(), CliError> {
    let grid = make_grid(lmax, config.lambda_count, config.lambda_ratio, &config.kappas)?;
    let plan = match config.folds {
        FoldSpec::LeaveOneOut => FoldPlan::leave_one_out(dataset.n()),
        FoldSpec::KFold(k) => FoldPlan::k_fold(dataset.n(), k, config.seed)?,
    };
    let mut results: Vec<CvResult> = Vec::with_capacity(grid.kappas.len());
    for &kappa in &grid.kappas {
        let hp = Hyperparams {
            kappa,
            ..config.hyperparams.clone()
        };
        log::info!("cross-validating kappa = {kappa:e} over {} folds", plan.len() - 1);
        results.push(cv_path(dataset, config.loss, &plan, &grid.lambdas, &hp, config.threads)?);
    }
    let rows: Vec<Row> = results
        .iter()
        .enumerate()
        .flat_map(|(kp, result)| {
            result.records.iter().map(move |r| Row {
                fold: r.fold,
                lambda_index: r.lambda_index,
                kappa_index: kp,
                solution: &r.solution,
                report: &r.report,
                wall_time: None,
            })
        })
        .collect();
    let full: Vec<Row> = rows.iter().filter(|r| r.fold == 0).copied().collect();
    write_coefficients(config, dataset, &full)?;
    write_path_report(config, &rows)?;
    write_cv_report(config, &results)
}

fn write_outputs(config: &RunConfig, dataset: &Dataset, rows: &[Row]) -> Result<(), CliError> {
    write_coefficients(config, dataset, rows)?;
    write_path_report(config, rows)
}

fn float(x: f64) -> String {
    format!("{x:.16e}")
}

/// Opens `name` under the output directory, writes the timestamp comment and
/// hands back a CSV writer positioned after it.
fn open_csv(config: &RunConfig, name: &str) -> Result<(csv::Writer<BufWriter<File>>, PathBuf), CliError> {
    let path = config.out.join(name);
    let io = |source| CliError::Io {
        path: path.clone(),
        source,
    };
    let mut file = BufWriter::new(File::create(&path).map_err(io)?);
    let stamp = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let command = match config.command {
        CommandKind::Fit => "fit",
        CommandKind::Path => "path",
        CommandKind::Cv => "cv",
    };
    writeln!(file, "# spp {command} written at unix time {stamp}").map_err(io)?;
    Ok((csv::Writer::from_writer(file), path))
}

fn finish(mut writer: csv::Writer<BufWriter<File>>, path: &Path) -> Result<(), CliError> {
    writer.flush().map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn csv_error(path: &Path, e: csv::Error) -> CliError {
    CliError::Io {
        path: path.to_path_buf(),
        source: e.into(),
    }
}

fn write_coefficients(config: &RunConfig, dataset: &Dataset, rows: &[Row]) -> Result<(), CliError> {
    let (mut w, path) = open_csv(config, COEFFICIENTS_FILE)?;
    let mut record = |fields: [String; 7]| w.write_record(&fields).map_err(|e| csv_error(&path, e));
    record(
        ["lambda_index", "kappa_index", "lambda", "kappa", "pattern", "support", "coefficient"].map(String::from),
    )?;
    for row in rows {
        let s = row.solution;
        let head = |pattern: String, support: usize, coef: f64| {
            [
                row.lambda_index.to_string(),
                row.kappa_index.to_string(),
                float(s.lambda),
                float(s.kappa),
                pattern,
                support.to_string(),
                float(coef),
            ]
        };
        record(head(INTERCEPT_LABEL.to_string(), dataset.n(), s.model.intercept))?;
        for term in &s.model.terms {
            record(head(format_pattern(&term.column.pattern), term.column.count(), term.coef))?;
        }
    }
    finish(w, &path)
}

fn write_path_report(config: &RunConfig, rows: &[Row]) -> Result<(), CliError> {
    let (mut w, path) = open_csv(config, PATH_REPORT_FILE)?;
    let header = [
        "fold",
        "lambda_index",
        "kappa_index",
        "lambda",
        "kappa",
        "gap",
        "active",
        "nonzero",
        "visited",
        "pruned",
        "epochs",
        "references",
        "wall_time_s",
    ];
    w.write_record(header).map_err(|e| csv_error(&path, e))?;
    for row in rows {
        let s = row.solution;
        let r = row.report;
        let fields = [
            row.fold.to_string(),
            row.lambda_index.to_string(),
            row.kappa_index.to_string(),
            float(s.lambda),
            float(s.kappa),
            float(s.gap),
            r.final_active.to_string(),
            s.model.terms.len().to_string(),
            r.traversal.visited.to_string(),
            r.traversal.pruned.to_string(),
            r.epochs.to_string(),
            r.reference_count.to_string(),
            row.wall_time.map(|t| format!("{:.6}", t.as_secs_f64())).unwrap_or_default(),
        ];
        w.write_record(&fields).map_err(|e| csv_error(&path, e))?;
    }
    finish(w, &path)
}

fn write_cv_report(config: &RunConfig, results: &[CvResult]) -> Result<(), CliError> {
    let (mut w, path) = open_csv(config, CV_REPORT_FILE)?;
    let mut record = |fields: [String; 6]| w.write_record(&fields).map_err(|e| csv_error(&path, e));
    record(["fold", "lambda_index", "kappa_index", "lambda", "kappa", "metric"].map(String::from))?;
    for (kp, result) in results.iter().enumerate() {
        for r in result.validation_records() {
            record([
                r.fold.to_string(),
                r.lambda_index.to_string(),
                kp.to_string(),
                float(r.lambda),
                float(r.kappa),
                float(r.metric),
            ])?;
        }
    }
    let selected = select_hyperparams(results.iter().flat_map(|r| r.validation_records()));
    if let Some((lambda, kappa)) = selected {
        let records = || results.iter().flat_map(|r| r.validation_records());
        let chosen: Vec<_> = records().filter(|r| r.lambda == lambda && r.kappa == kappa).collect();
        let mean = chosen.iter().map(|r| r.metric).sum::<f64>() / chosen.len() as f64;
        let kp = results.iter().position(|r| r.records.first().is_some_and(|x| x.kappa == kappa)).unwrap_or(0);
        let k = chosen.first().map(|r| r.lambda_index).unwrap_or(0);
        log::info!("selected lambda = {lambda:e}, kappa = {kappa:e}, mean metric {mean:e}");
        record(["selected".into(), k.to_string(), kp.to_string(), float(lambda), float(kappa), float(mean)])?;
    }
    finish(w, &path)
}

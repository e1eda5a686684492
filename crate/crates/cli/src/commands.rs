//! Command implementations: train, grid, pareto, lambda-sweep.

use crate::config::{ExperimentConfig, GridCell, TrainMethod};
use crate::pareto;
use crate::summary::{self, SummaryRow};
use fairlens::data::{Dataset, Split};
use fairlens::trainer::{train_cfa, train_reweight, RunResult, TrainConfig};
use fairlens::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, VecDeque};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

/// The per-run JSON document (`runs/<cell>_<seed>.json`); the epoch log
/// and checkpoint live in sibling files.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunRecord {
    pub cell: String,
    pub seed: u64,
    pub config: TrainConfig,
    pub best_epoch: usize,
    pub best_val_score: f64,
    pub test_report: fairlens::fairmetrics::FairnessReport,
}

struct Job {
    index: usize,
    cell: String,
    config: TrainConfig,
}

fn run_one(ds: &Dataset, split: &Split, method: TrainMethod, cfg: &TrainConfig) -> Result<RunResult> {
    match method {
        TrainMethod::Cfa => train_cfa(ds, split, cfg),
        TrainMethod::Reweight { eta, outer_iters } => {
            train_reweight(ds, split, cfg, eta, outer_iters)
        }
    }
}

/// Run all (cell, seed) jobs on a bounded worker pool. Results come back
/// in job order regardless of scheduling.
fn run_jobs(
    ds: &Dataset,
    split: &Split,
    method: TrainMethod,
    cells: &[GridCell],
    seeds: &[u64],
    parallel: usize,
) -> Vec<(String, u64, Result<RunResult>)> {
    let mut jobs = VecDeque::new();
    let mut index = 0usize;
    for cell in cells {
        for &seed in seeds {
            let mut config = cell.config.clone();
            config.seed = seed;
            jobs.push_back(Job {
                index,
                cell: cell.id.clone(),
                config,
            });
            index += 1;
        }
    }
    let total = jobs.len();
    let queue = Mutex::new(jobs);
    let results: Mutex<Vec<Option<(String, u64, Result<RunResult>)>>> =
        Mutex::new((0..total).map(|_| None).collect());

    let workers = parallel.max(1).min(total.max(1));
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let job = match queue.lock().unwrap().pop_front() {
                    Some(job) => job,
                    None => break,
                };
                let outcome = run_one(ds, split, method, &job.config);
                results.lock().unwrap()[job.index] =
                    Some((job.cell, job.config.seed, outcome));
            });
        }
    });
    results
        .into_inner()
        .unwrap()
        .into_iter()
        .map(|slot| slot.expect("every job recorded"))
        .collect()
}

fn write_run_files(out: &Path, cell: &str, result: &RunResult) -> Result<()> {
    let runs_dir = out.join("runs");
    std::fs::create_dir_all(&runs_dir)?;
    let stem = format!("{cell}_{}", result.seed);

    let record = RunRecord {
        cell: cell.to_string(),
        seed: result.seed,
        config: result.config.clone(),
        best_epoch: result.best_epoch,
        best_val_score: result.best_val_score,
        test_report: result.test_report.clone(),
    };
    let mut json = serde_json::to_string_pretty(&record)?;
    json.push('\n');
    std::fs::write(runs_dir.join(format!("{stem}.json")), json)?;

    let mut log = std::fs::File::create(runs_dir.join(format!("{stem}.epochs.jsonl")))?;
    for entry in &result.epochs {
        serde_json::to_writer(&mut log, entry)?;
        log.write_all(b"\n")?;
    }

    result
        .checkpoint
        .save(runs_dir.join(format!("{stem}.model.json")))?;
    Ok(())
}

/// Train every seed of a single-cell config; three files per run.
pub fn cmd_train(cfg: &ExperimentConfig, parallel: usize) -> Result<()> {
    let cells = cfg.expand_grid()?;
    if cells.len() != 1 {
        return Err(Error::Config(format!(
            "train expects a singleton grid, got {} cells (use the grid command)",
            cells.len()
        )));
    }
    let (ds, split) = cfg.materialize_data()?;
    std::fs::create_dir_all(&cfg.output_dir)?;
    let results = run_jobs(&ds, &split, cfg.method, &cells, &cfg.seeds, parallel);
    for (cell, seed, outcome) in results {
        let result = outcome?;
        write_run_files(&cfg.output_dir, &cell, &result)?;
        println!(
            "{cell} seed {seed}: best epoch {} val score {:.2} test score {:.2}",
            result.best_epoch,
            result.best_val_score * 100.0,
            result.test_report.score * 100.0
        );
    }
    Ok(())
}

/// Run the whole grid x seed matrix, write per-run files, and aggregate
/// into summary.csv. Individual cell failures are recorded in the summary;
/// the command only fails when every cell fails.
pub fn cmd_grid(cfg: &ExperimentConfig, parallel: usize) -> Result<PathBuf> {
    let cells = cfg.expand_grid()?;
    let (ds, split) = cfg.materialize_data()?;
    std::fs::create_dir_all(&cfg.output_dir)?;
    let results = run_jobs(&ds, &split, cfg.method, &cells, &cfg.seeds, parallel);

    let mut per_cell: BTreeMap<String, Vec<RunResult>> = BTreeMap::new();
    let mut failures: BTreeMap<String, String> = BTreeMap::new();
    let mut any_numeric = false;
    for (cell, _seed, outcome) in results {
        match outcome {
            Ok(result) => {
                write_run_files(&cfg.output_dir, &cell, &result)?;
                per_cell.entry(cell).or_default().push(result);
            }
            Err(e) => {
                if matches!(e, Error::Numeric(_)) {
                    any_numeric = true;
                }
                failures
                    .entry(cell)
                    .and_modify(|m| {
                        m.push_str("; ");
                        m.push_str(&e.to_string());
                    })
                    .or_insert_with(|| e.to_string());
            }
        }
    }

    let mut rows: Vec<SummaryRow> = Vec::new();
    for cell in &cells {
        match per_cell.get(&cell.id) {
            Some(runs) if !runs.is_empty() => {
                let refs: Vec<&RunResult> = runs.iter().collect();
                let mut row = summary::summarize_cell(&cell.id, &refs);
                if let Some(msg) = failures.get(&cell.id) {
                    // Partial failures: keep the aggregate but flag it.
                    row.status = "partial".into();
                    row.error = msg.clone();
                }
                rows.push(row);
            }
            _ => {
                let msg = failures
                    .get(&cell.id)
                    .cloned()
                    .unwrap_or_else(|| "no runs".into());
                rows.push(summary::failed_cell(&cell.id, &msg));
            }
        }
    }
    if rows.iter().all(|r| r.status == "failed") {
        let detail = rows
            .first()
            .map(|r| r.error.clone())
            .unwrap_or_default();
        return Err(if any_numeric {
            Error::Numeric(format!("every grid cell failed; first error: {detail}"))
        } else {
            Error::Config(format!("every grid cell failed; first error: {detail}"))
        });
    }
    summary::mark_winner(&mut rows);
    let path = cfg.output_dir.join("summary.csv");
    summary::write_summary(&path, &rows)?;
    if let Some(winner) = rows.iter().find(|r| r.selected) {
        println!(
            "winner: {} (mean val score {:.2})",
            winner.cell, winner.val_score_mean
        );
    }
    Ok(path)
}

/// Extract the Pareto frontier from a summary file.
pub fn cmd_pareto(summary_path: &Path, out_dir: &Path) -> Result<()> {
    let rows = summary::read_summary(summary_path)?;
    let points = pareto::from_summary(&rows)?;
    std::fs::create_dir_all(out_dir)?;
    pareto::write_csv(out_dir.join("pareto.csv"), &points)?;
    let mut json = serde_json::to_string_pretty(&points)?;
    json.push('\n');
    std::fs::write(out_dir.join("pareto.json"), json)?;
    let kept = points.iter().filter(|p| !p.dominated).count();
    println!("{kept} of {} points on the frontier", points.len());
    Ok(())
}

/// Sweep the regularization coefficient, aggregating per-lambda metrics.
/// Every other grid axis must be a singleton.
pub fn cmd_lambda_sweep(
    cfg: &ExperimentConfig,
    lambdas: &[f64],
    parallel: usize,
) -> Result<PathBuf> {
    if lambdas.len() < 2 {
        return Err(Error::Config("lambda sweep needs at least two values".into()));
    }
    let mut sweep_cfg = cfg.clone();
    sweep_cfg.grid.lambda = lambdas.to_vec();
    let cells = sweep_cfg.expand_grid()?;
    if cells.len() != lambdas.len() {
        return Err(Error::Config(
            "lambda sweep requires every non-lambda grid axis to be a singleton".into(),
        ));
    }
    let (ds, split) = sweep_cfg.materialize_data()?;
    std::fs::create_dir_all(&sweep_cfg.output_dir)?;
    let results = run_jobs(&ds, &split, sweep_cfg.method, &cells, &sweep_cfg.seeds, parallel);

    let mut per_cell: BTreeMap<String, Vec<RunResult>> = BTreeMap::new();
    for (cell, _seed, outcome) in results {
        let result = outcome?;
        write_run_files(&sweep_cfg.output_dir, &cell, &result)?;
        per_cell.entry(cell).or_default().push(result);
    }

    let path = sweep_cfg.output_dir.join("lambda_sweep.csv");
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record(["lambda", "utility", "fairness_gap", "delta_ref", "delta_vef"])?;
    for (lambda, cell) in lambdas.iter().zip(&cells) {
        let runs = &per_cell[&cell.id];
        let n = runs.len() as f64;
        let mean = |f: &dyn Fn(&RunResult) -> f64| -> f64 {
            runs.iter().map(|r| f(r) * 100.0).sum::<f64>() / n
        };
        let utility =
            mean(&|r| (r.test_report.auc + r.test_report.f1 + r.test_report.acc) / 3.0);
        let fairness = mean(&|r| (r.test_report.delta_sp + r.test_report.delta_eo) / 2.0);
        let d_ref = mean(&|r| r.test_report.delta_ref);
        let d_vef = mean(&|r| r.test_report.delta_vef);
        w.write_record([
            format!("{lambda}"),
            format!("{utility}"),
            format!("{fairness}"),
            format!("{d_ref}"),
            format!("{d_vef}"),
        ])?;
    }
    w.flush()?;
    Ok(path)
}

//! Phase-diagram sweeps over images, measurement rates and repetitions.

use std::collections::HashSet;
use std::sync::{Arc, Mutex};
use std::time::Instant;

use rayon::prelude::*;

use crate::amp::{reconstruct, CsInstance, PriorMode, SolverOptions};
use crate::data::{
    estimate_global_prior, estimate_pixel_priors, load_signals, make_instance, measurement_count, stream_rng, SignalSet,
    Stream,
};
use crate::error::{Error, Result};
use crate::experiment::config::{ExperimentSpec, SolverMode};
use crate::experiment::metrics::{correlation_with, mse_db};
use crate::experiment::records::{
    aggregate, append_timings, read_records, write_grid, write_records, RecordKey, RecordWriter, ResultRecord, Timing,
};
use crate::model_io;

fn load(path: &std::path::Path, count: usize, binarize: Option<f64>) -> Result<SignalSet> {
    let set = load_signals(path)?.head(count);
    Ok(match binarize {
        Some(t) => set.binarized(t),
        None => set,
    })
}

/// Test signals and solver options described by `spec`.
pub fn prepare(spec: &ExperimentSpec) -> Result<(SignalSet, SolverOptions)> {
    spec.validate()?;
    let signals = load(spec.dataset.as_ref().unwrap(), spec.images, spec.binarize)?;
    let n = signals.dim();
    let prior = match spec.mode {
        SolverMode::Grbm => {
            let model = model_io::load(spec.model.as_ref().unwrap())?;
            if model.n_visible() != n {
                return Err(Error::Config(format!(
                    "model has {} visible units, signals have {n} entries",
                    model.n_visible()
                )));
            }
            PriorMode::Grbm(Arc::new(model))
        }
        mode => {
            let train = load(spec.train_dataset.as_ref().unwrap(), spec.train_images, spec.binarize)?;
            if train.dim() != n {
                return Err(Error::Config(format!(
                    "training signals have {} entries, test signals {n}",
                    train.dim()
                )));
            }
            if mode == SolverMode::Iid {
                PriorMode::iid(estimate_global_prior(&train, Some(spec.bounds))?, n)
            } else {
                PriorMode::Factorized(estimate_pixel_priors(&train, Some(spec.bounds))?)
            }
        }
    };
    let mut options = SolverOptions::new(prior);
    if let Some(g) = spec.damping {
        options.damping = g;
    }
    options.tol_out = spec.tol_out;
    options.max_outer = spec.max_outer;
    options.tap.tol = spec.tol_in;
    options.tap.max_sweeps = spec.max_inner;
    options.validate().map_err(|e| Error::Config(e.to_string()))?;
    Ok((signals, options))
}

/// The sensing instance of one `(image, alpha, repetition)` cell, drawn
/// from that cell's own random stream.
pub fn cell_instance(
    spec: &ExperimentSpec,
    signals: &SignalSet,
    image: usize,
    alpha_index: usize,
    rep: usize,
) -> Result<CsInstance> {
    let mut rng = stream_rng(
        spec.seed,
        Stream::Instance {
            image: image as u32,
            alpha: alpha_index as u16,
            rep: rep as u16,
        },
    );
    make_instance(signals.sample(image), spec.alphas[alpha_index], spec.delta, spec.scaling, &mut rng)
}

/// Reconstructs one `(image, alpha, repetition)` cell. Solver failures
/// become records with status `error: ...`.
pub fn run_cell(
    spec: &ExperimentSpec,
    signals: &SignalSet,
    options: &SolverOptions,
    image: usize,
    alpha_index: usize,
    rep: usize,
) -> (ResultRecord, Timing) {
    let alpha = spec.alphas[alpha_index];
    let x = signals.sample(image);
    let started = Instant::now();
    let outcome = cell_instance(spec, signals, image, alpha_index, rep).and_then(|inst| reconstruct(&inst, options));
    let mut record = ResultRecord {
        image,
        alpha,
        rep,
        k: signals.sparsity()[image],
        rho: signals.rho(image),
        m: measurement_count(alpha, signals.dim()).unwrap_or(0),
        mode: spec.mode.as_str().to_string(),
        mse_db: f64::NAN,
        correlation: f64::NAN,
        constant_input: false,
        outer_iterations: 0,
        inner_iterations: 0,
        converged: false,
        status: "ok".into(),
        seed: spec.seed,
    };
    match outcome {
        Ok(r) => {
            let c = correlation_with(x, r.mean().view(), spec.correlation);
            record.mse_db = mse_db(x, r.mean().view());
            record.correlation = c.value;
            record.constant_input = c.constant_input;
            record.outer_iterations = r.diagnostics.iterations;
            record.inner_iterations = r.diagnostics.inner_total();
            record.converged = r.diagnostics.converged;
        }
        Err(e) => {
            log::warn!("image {image}, alpha {alpha}, rep {rep}: {e}");
            record.status = format!("error: {e}");
            if let Error::NonFinite { iteration, .. } = e {
                record.outer_iterations = iteration;
            }
        }
    }
    let timing = Timing {
        image,
        alpha,
        rep,
        wall_secs: started.elapsed().as_secs_f64(),
    };
    (record, timing)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SweepSummary {
    pub total: usize,
    pub computed: usize,
    pub skipped: usize,
    pub failed: usize,
}

/// Runs every cell not already present in `out_dir/records.csv`, then
/// rewrites the records in grid order and writes `grid.csv`. Wall times
/// go to `timings.csv`.
pub fn run_phase_sweep(spec: &ExperimentSpec) -> Result<SweepSummary> {
    let (signals, options) = prepare(spec)?;
    std::fs::create_dir_all(&spec.out_dir).map_err(|e| Error::io(&spec.out_dir, e))?;
    let records_path = spec.out_dir.join("records.csv");
    let timings_path = spec.out_dir.join("timings.csv");

    let mut cells = Vec::new();
    let mut order = std::collections::HashMap::new();
    for image in 0..signals.len() {
        for (ai, &alpha) in spec.alphas.iter().enumerate() {
            for rep in 0..spec.repetitions {
                order.insert((image, alpha.to_bits(), rep), cells.len());
                cells.push((image, ai, rep));
            }
        }
    }
    let done: HashSet<RecordKey> = if records_path.exists() {
        // rewrite so a torn last line cannot swallow the next append
        let kept: Vec<ResultRecord> = read_records(&records_path)?
            .into_iter()
            .filter(|r| order.contains_key(&r.key()))
            .collect();
        write_records(&records_path, &kept)?;
        kept.iter().map(ResultRecord::key).collect()
    } else {
        HashSet::new()
    };
    let todo: Vec<_> = cells
        .iter()
        .copied()
        .filter(|&(i, ai, r)| !done.contains(&(i, spec.alphas[ai].to_bits(), r)))
        .collect();
    log::info!("{} cells, {} already recorded", cells.len(), cells.len() - todo.len());

    let writer = Mutex::new(RecordWriter::open(&records_path)?);
    let timings = Mutex::new(Vec::new());
    todo.par_iter().try_for_each(|&(image, ai, rep)| -> Result<()> {
        let (record, timing) = run_cell(spec, &signals, &options, image, ai, rep);
        writer.lock().unwrap().append(&record)?;
        timings.lock().unwrap().push(timing);
        Ok(())
    })?;
    drop(writer);
    append_timings(&timings_path, &timings.into_inner().unwrap())?;

    let mut records: Vec<ResultRecord> = read_records(&records_path)?
        .into_iter()
        .filter(|r| order.contains_key(&r.key()))
        .collect();
    records.sort_by_key(|r| order[&r.key()]);
    records.dedup_by_key(|r| r.key());
    write_records(&records_path, &records)?;
    write_grid(&spec.out_dir.join("grid.csv"), &aggregate(&records, spec.rho_bin_width))?;
    Ok(SweepSummary {
        total: cells.len(),
        computed: todo.len(),
        skipped: cells.len() - todo.len(),
        failed: records.iter().filter(|r| r.failed()).count(),
    })
}

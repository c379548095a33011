//! Timing harness comparing one incremental block update against a full
//! retrain with the direct solver, on synthetic data. Correctness (the
//! weight deviation) is always measured alongside the times; the speedup is
//! hardware-dependent and reported, never asserted here.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::Result;
use crate::grow_ldl::LdlState;
use crate::grow_q::QState;
use crate::matrix::Matrix;
use crate::model::NodeBlock;
use crate::session::Variant;
use crate::solve::direct_weights;

/// Grid of configurations to measure. Empty lists yield an empty report.
#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub hidden_sizes: Vec<usize>,
    pub block_sizes: Vec<usize>,
    pub sample_counts: Vec<usize>,
    pub variants: Vec<Variant>,
    pub inputs: usize,
    pub outputs: usize,
    pub ridge: f64,
    pub repetitions: usize,
    pub seed: u64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            hidden_sizes: vec![256],
            block_sizes: vec![8],
            sample_counts: vec![4096],
            variants: vec![Variant::Q, Variant::Ldl],
            inputs: 8,
            outputs: 2,
            ridge: 1.0,
            repetitions: 5,
            seed: 0,
        }
    }
}

/// One measured cell of the grid. Times are medians over the repetitions.
#[derive(Debug, Clone, Serialize)]
pub struct BenchRow {
    pub hidden: usize,
    pub added: usize,
    pub samples: usize,
    pub variant: Variant,
    pub update_seconds: f64,
    pub retrain_seconds: f64,
    pub speedup: f64,
    pub weight_deviation: f64,
}

pub fn run_bench(config: &BenchConfig) -> Result<Vec<BenchRow>> {
    let mut rows = Vec::new();
    let mut cell = 0u64;
    for &hidden in &config.hidden_sizes {
        for &added in &config.block_sizes {
            for &samples in &config.sample_counts {
                // one synthetic problem per (l, delta, K) cell, shared by
                // both variants so their rows are comparable
                let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(cell));
                cell += 1;
                let base_hidden =
                    Matrix::from_fn(hidden, samples, |_, _| rng.gen_range(-1.0..=1.0));
                let targets =
                    Matrix::from_fn(config.outputs, samples, |_, _| rng.gen_range(-1.0..=1.0));
                let new_rows = Matrix::from_fn(added, samples, |_, _| rng.gen_range(-1.0..=1.0));
                let block = NodeBlock {
                    input_weights: Matrix::zeros(added, config.inputs.max(1)),
                    biases: vec![0.0; added],
                    hidden_rows: new_rows,
                };

                for &variant in &config.variants {
                    let row = match variant {
                        Variant::Q => {
                            let state =
                                QState::new(base_hidden.clone(), targets.clone(), config.ridge)?;
                            let (update_seconds, grown_hidden, grown_weights) =
                                time_updates(config.repetitions, || {
                                    let g = state.grow_block(&block)?;
                                    Ok((g.hidden().clone(), g.weights().clone()))
                                })?;
                            measure_retrain(
                                config,
                                hidden,
                                added,
                                samples,
                                variant,
                                update_seconds,
                                grown_hidden,
                                grown_weights,
                                &targets,
                            )?
                        }
                        Variant::Ldl => {
                            let state =
                                LdlState::new(base_hidden.clone(), targets.clone(), config.ridge)?;
                            let (update_seconds, grown_hidden, grown_weights) =
                                time_updates(config.repetitions, || {
                                    let g = state.grow_block(&block)?;
                                    Ok((g.hidden().clone(), g.weights().clone()))
                                })?;
                            measure_retrain(
                                config,
                                hidden,
                                added,
                                samples,
                                variant,
                                update_seconds,
                                grown_hidden,
                                grown_weights,
                                &targets,
                            )?
                        }
                    };
                    rows.push(row);
                }
            }
        }
    }
    Ok(rows)
}

fn time_updates(
    repetitions: usize,
    update: impl Fn() -> Result<(Matrix, Matrix)>,
) -> Result<(f64, Matrix, Matrix)> {
    let reps = repetitions.max(1);
    let mut times = Vec::with_capacity(reps);
    let mut result = None;
    for _ in 0..reps {
        let start = Instant::now();
        let out = update()?;
        times.push(start.elapsed().as_secs_f64());
        result = Some(out);
    }
    let (hidden, weights) = result.expect("at least one repetition");
    Ok((median(&mut times), hidden, weights))
}

#[allow(clippy::too_many_arguments)]
fn measure_retrain(
    config: &BenchConfig,
    hidden: usize,
    added: usize,
    samples: usize,
    variant: Variant,
    update_seconds: f64,
    grown_hidden: Matrix,
    grown_weights: Matrix,
    targets: &Matrix,
) -> Result<BenchRow> {
    let reps = config.repetitions.max(1);
    let mut times = Vec::with_capacity(reps);
    let mut oracle = None;
    for _ in 0..reps {
        let start = Instant::now();
        let w = direct_weights(&grown_hidden, targets, config.ridge)?;
        times.push(start.elapsed().as_secs_f64());
        oracle = Some(w);
    }
    let retrain_seconds = median(&mut times);
    let weight_deviation = grown_weights.relative_deviation(&oracle.expect("reps >= 1"));
    Ok(BenchRow {
        hidden,
        added,
        samples,
        variant,
        update_seconds,
        retrain_seconds,
        speedup: retrain_seconds / update_seconds,
        weight_deviation,
    })
}

fn median(times: &mut [f64]) -> f64 {
    times.sort_by(|a, b| a.partial_cmp(b).expect("finite times"));
    times[times.len() / 2]
}

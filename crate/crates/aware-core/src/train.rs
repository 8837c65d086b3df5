//! Supervised training: mini-batch Adam with early stopping on a
//! validation metric, seed sweeps with per-seed splits, and the ablation
//! matrix over the weighting components.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{split_dataset, Dataset, Graph, SplitSpec, TaskKind};
use crate::metrics::{accuracy, mae, rmse, roc_auc, Metric};
use crate::model::{batch_gradients, predict_graph, AwareConfig, AwareParams};
use crate::optim::{adam_step, AdamHyper, AdamState};
use crate::tensor::Matrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub aware: AwareConfig,
    #[serde(default = "default_lr")]
    pub lr: f64,
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default = "default_patience")]
    pub patience: usize,
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    pub metric: Metric,
    #[serde(default = "default_ratios")]
    pub split_ratios: (f64, f64, f64),
}

fn default_lr() -> f64 {
    1e-3
}
fn default_epochs() -> usize {
    500
}
fn default_patience() -> usize {
    50
}
fn default_batch_size() -> usize {
    32
}
fn default_seeds() -> Vec<u64> {
    vec![0, 1, 2, 3, 4]
}
fn default_ratios() -> (f64, f64, f64) {
    (0.8, 0.1, 0.1)
}

impl TrainConfig {
    pub fn new(aware: AwareConfig, metric: Metric) -> Self {
        TrainConfig {
            aware,
            lr: default_lr(),
            epochs: default_epochs(),
            patience: default_patience(),
            batch_size: default_batch_size(),
            seeds: default_seeds(),
            metric,
            split_ratios: default_ratios(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.aware.validate()?;
        if self.patience > self.epochs {
            return Err(Error::Config(format!(
                "patience {} exceeds epochs {}",
                self.patience, self.epochs
            )));
        }
        if self.batch_size == 0 || self.epochs == 0 {
            return Err(Error::Config("batch size and epochs must be >= 1".into()));
        }
        if !self.metric.compatible_with(self.aware.task_kind) {
            return Err(Error::Config(format!(
                "metric {:?} incompatible with task {:?}",
                self.metric, self.aware.task_kind
            )));
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("at least one seed required".into()));
        }
        Ok(())
    }
}

/// Outcome of one training run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SeedRecord {
    pub seed: u64,
    pub best_epoch: usize,
    pub epochs_run: usize,
    pub val_metric: f64,
    pub test_metric: f64,
    pub train_loss_history: Vec<f64>,
    pub val_history: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunResult {
    pub metric: Metric,
    pub records: Vec<SeedRecord>,
    pub mean_test_metric: f64,
    pub std_test_metric: f64,
}

impl RunResult {
    fn aggregate(metric: Metric, records: Vec<SeedRecord>) -> RunResult {
        let n = records.len() as f64;
        let mean = records.iter().map(|r| r.test_metric).sum::<f64>() / n;
        let std = if records.len() > 1 {
            (records
                .iter()
                .map(|r| (r.test_metric - mean).powi(2))
                .sum::<f64>()
                / (n - 1.0))
                .sqrt()
        } else {
            0.0
        };
        RunResult {
            metric,
            records,
            mean_test_metric: mean,
            std_test_metric: std,
        }
    }
}

fn derived_seed(seed: u64, stream: u64) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(stream)
}

/// Evaluate a metric over a set of graphs.
pub fn evaluate(
    params: &AwareParams<f64>,
    config: &AwareConfig,
    dataset: &Dataset,
    indices: &[usize],
    metric: Metric,
) -> Result<f64> {
    if !metric.compatible_with(config.task_kind) {
        return Err(Error::Metric(format!(
            "metric {:?} incompatible with task {:?}",
            metric, config.task_kind
        )));
    }
    let graphs: Vec<&Graph> = indices.iter().map(|&i| &dataset.graphs[i]).collect();
    evaluate_graphs(params, config, &dataset.schema, &graphs, metric)
}

pub fn evaluate_graphs(
    params: &AwareParams<f64>,
    config: &AwareConfig,
    schema: &crate::graph::AttributeSchema,
    graphs: &[&Graph],
    metric: Metric,
) -> Result<f64> {
    let mut outputs: Vec<Matrix<f64>> = Vec::with_capacity(graphs.len());
    for g in graphs {
        outputs.push(predict_graph(g, schema, params, config)?);
    }
    let labels: Vec<f64> = graphs
        .iter()
        .map(|g| g.label.ok_or_else(|| Error::Metric("missing label".into())))
        .collect::<Result<_>>()?;
    match metric {
        Metric::Acc => {
            let predicted: Vec<usize> = outputs
                .iter()
                .map(|o| match config.task_kind {
                    TaskKind::BinaryClassification => usize::from(o.get(0, 0) > 0.0),
                    _ => argmax(o),
                })
                .collect();
            let truth: Vec<usize> = labels.iter().map(|&l| l as usize).collect();
            accuracy(&predicted, &truth)
        }
        Metric::RocAuc => {
            let scores: Vec<f64> = outputs.iter().map(|o| o.get(0, 0)).collect();
            let truth: Vec<u8> = labels.iter().map(|&l| l as u8).collect();
            roc_auc(&scores, &truth)
        }
        Metric::Rmse => {
            let predicted: Vec<f64> = outputs.iter().map(|o| o.get(0, 0)).collect();
            rmse(&predicted, &labels)
        }
        Metric::Mae => {
            let predicted: Vec<f64> = outputs.iter().map(|o| o.get(0, 0)).collect();
            mae(&predicted, &labels)
        }
    }
}

fn argmax(m: &Matrix<f64>) -> usize {
    let mut best = 0;
    for r in 1..m.rows() {
        if m.get(r, 0) > m.get(best, 0) {
            best = r;
        }
    }
    best
}

fn is_improvement(metric: Metric, candidate: f64, best: Option<f64>) -> bool {
    match best {
        None => true,
        Some(best) => {
            if metric.higher_is_better() {
                candidate > best
            } else {
                candidate < best
            }
        }
    }
}

/// Train on one split. Mini-batch Adam over the trainable parameters
/// (a frozen `W` stays out), per-epoch validation, early stopping after
/// `patience` epochs without strict improvement, parameters restored from
/// the best-validation epoch. Deterministic given the seed.
pub fn train(
    dataset: &Dataset,
    split: &SplitSpec,
    config: &TrainConfig,
    seed: u64,
) -> Result<(SeedRecord, AwareParams<f64>)> {
    config.validate()?;
    dataset.validate()?;
    if split.train_idx.is_empty() || split.val_idx.is_empty() || split.test_idx.is_empty() {
        return Err(Error::Split(
            "training needs non-empty train/validation/test splits".into(),
        ));
    }
    let aware = &config.aware;
    let class_count = dataset.class_count();
    let mut params = AwareParams::init(aware, &dataset.schema, class_count, derived_seed(seed, 1))?;
    let roles = params.trainable_roles(aware);
    let mut adam = {
        let mats: Vec<Matrix<f64>> = roles.iter().map(|&r| params.get(r).clone()).collect();
        AdamState::new(&mats, AdamHyper::with_lr(config.lr))
    };
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(derived_seed(seed, 2));

    let mut best_params = params.clone();
    let mut best_val: Option<f64> = None;
    let mut best_epoch = 0usize;
    let mut stall = 0usize;
    let mut train_loss_history = Vec::new();
    let mut val_history = Vec::new();
    let mut epochs_run = 0usize;

    let mut order: Vec<usize> = split.train_idx.clone();
    for epoch in 1..=config.epochs {
        epochs_run = epoch;
        order.shuffle(&mut shuffle_rng);
        let mut epoch_loss = 0.0;
        let mut batches = 0usize;
        for (batch_no, chunk) in order.chunks(config.batch_size).enumerate() {
            let graphs: Vec<&Graph> = chunk.iter().map(|&i| &dataset.graphs[i]).collect();
            let (loss, grads) = batch_gradients(&graphs, &dataset.schema, &params, aware)
                .map_err(|e| match e {
                    Error::NonFinite { .. } => Error::NonFiniteLoss {
                        epoch,
                        batch: batch_no,
                    },
                    other => other,
                })?;
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss {
                    epoch,
                    batch: batch_no,
                });
            }
            epoch_loss += loss;
            batches += 1;
            let mut mats: Vec<Matrix<f64>> =
                roles.iter().map(|&r| params.get(r).clone()).collect();
            adam_step(&mut mats, &grads, &mut adam)?;
            for (role, mat) in roles.iter().zip(mats) {
                *params.get_mut(*role) = mat;
            }
        }
        train_loss_history.push(epoch_loss / batches.max(1) as f64);

        let val = evaluate(&params, aware, dataset, &split.val_idx, config.metric)?;
        val_history.push(val);
        if is_improvement(config.metric, val, best_val) {
            best_val = Some(val);
            best_epoch = epoch;
            best_params = params.clone();
            stall = 0;
        } else {
            stall += 1;
            if stall >= config.patience {
                break;
            }
        }
    }

    let test = evaluate(&best_params, aware, dataset, &split.test_idx, config.metric)?;
    Ok((
        SeedRecord {
            seed,
            best_epoch,
            epochs_run,
            val_metric: best_val.unwrap_or(f64::NAN),
            test_metric: test,
            train_loss_history,
            val_history,
        },
        best_params,
    ))
}

/// Plain mini-batch optimization for a fixed number of epochs, returning
/// the final parameters (no validation snapshotting). The interpretation
/// experiments use this: attention concentration and weighting alignment
/// develop during margin growth, well after the validation metric
/// saturates.
pub fn fit(
    dataset: &Dataset,
    train_idx: &[usize],
    config: &TrainConfig,
    seed: u64,
) -> Result<AwareParams<f64>> {
    config.validate()?;
    let aware = &config.aware;
    let mut params = AwareParams::init(
        aware,
        &dataset.schema,
        dataset.class_count(),
        derived_seed(seed, 1),
    )?;
    let roles = params.trainable_roles(aware);
    let mut adam = {
        let mats: Vec<Matrix<f64>> = roles.iter().map(|&r| params.get(r).clone()).collect();
        AdamState::new(&mats, AdamHyper::with_lr(config.lr))
    };
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(derived_seed(seed, 2));
    let mut order = train_idx.to_vec();
    for epoch in 1..=config.epochs {
        order.shuffle(&mut shuffle_rng);
        for (batch_no, chunk) in order.chunks(config.batch_size).enumerate() {
            let graphs: Vec<&Graph> = chunk.iter().map(|&i| &dataset.graphs[i]).collect();
            let (loss, grads) = batch_gradients(&graphs, &dataset.schema, &params, aware)?;
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss {
                    epoch,
                    batch: batch_no,
                });
            }
            let mut mats: Vec<Matrix<f64>> =
                roles.iter().map(|&r| params.get(r).clone()).collect();
            adam_step(&mut mats, &grads, &mut adam)?;
            for (role, mat) in roles.iter().zip(mats) {
                *params.get_mut(*role) = mat;
            }
        }
    }
    Ok(params)
}

/// Fresh split + fresh initialization + training per seed; seeds run in
/// parallel, each owning its model and random streams.
pub fn seed_sweep(dataset: &Dataset, config: &TrainConfig) -> Result<RunResult> {
    Ok(seed_sweep_with_params(dataset, config)?.0)
}

/// Seed sweep that also returns the trained (best-validation) parameters
/// per seed, in seed order.
pub fn seed_sweep_with_params(
    dataset: &Dataset,
    config: &TrainConfig,
) -> Result<(RunResult, Vec<AwareParams<f64>>)> {
    config.validate()?;
    let outcomes: Vec<(SeedRecord, AwareParams<f64>)> = config
        .seeds
        .par_iter()
        .map(|&seed| {
            let split = split_dataset(dataset, config.split_ratios, seed)?;
            train(dataset, &split, config, seed)
        })
        .collect::<Result<_>>()?;
    let mut records = Vec::with_capacity(outcomes.len());
    let mut params = Vec::with_capacity(outcomes.len());
    for (record, p) in outcomes {
        records.push(record);
        params.push(p);
    }
    Ok((RunResult::aggregate(config.metric, records), params))
}

/// Grid candidates: learning rate, predictor depth, max walk length, and
/// the two embedding dimensions.
pub const GRID_LEARNING_RATES: &[f64] = &[1e-3, 1e-4];
pub const GRID_PREDICTOR_LAYERS: &[usize] = &[1, 2, 3];
pub const GRID_WALK_LENGTHS: &[usize] = &[3, 6, 9, 12];
pub const GRID_EMBED_DIMS: &[usize] = &[100, 300, 500];
pub const GRID_LATENT_DIMS: &[usize] = &[100, 300, 500];

/// The full hyperparameter grid over the candidate values, every other
/// field taken from the base configuration. 216 configurations.
pub fn hyperparameter_grid(base: &TrainConfig) -> Vec<TrainConfig> {
    let mut out = Vec::with_capacity(
        GRID_LEARNING_RATES.len()
            * GRID_PREDICTOR_LAYERS.len()
            * GRID_WALK_LENGTHS.len()
            * GRID_EMBED_DIMS.len()
            * GRID_LATENT_DIMS.len(),
    );
    for &lr in GRID_LEARNING_RATES {
        for &layers in GRID_PREDICTOR_LAYERS {
            for &t in GRID_WALK_LENGTHS {
                for &r in GRID_EMBED_DIMS {
                    for &r_prime in GRID_LATENT_DIMS {
                        let mut cfg = base.clone();
                        cfg.lr = lr;
                        cfg.aware.layers = layers;
                        cfg.aware.t = t;
                        cfg.aware.r = r;
                        cfg.aware.r_prime = r_prime;
                        cfg.aware.normalize();
                        out.push(cfg);
                    }
                }
            }
        }
    }
    out
}

/// The ablation matrix: the base configuration plus the seven component
/// removals/modifications, in a fixed order.
pub fn ablation_matrix(base: &TrainConfig) -> Vec<(String, TrainConfig)> {
    let mut out = Vec::with_capacity(8);
    out.push(("base".to_string(), base.clone()));

    let mut no_wv = base.clone();
    no_wv.aware.use_wv = false;
    out.push(("no-wv".to_string(), no_wv));

    let mut no_ww = base.clone();
    no_ww.aware.use_ww = false;
    out.push(("no-ww".to_string(), no_ww));

    let mut no_wg = base.clone();
    no_wg.aware.use_wg = false;
    out.push(("no-wg".to_string(), no_wg));

    let mut none = base.clone();
    none.aware.use_wv = false;
    none.aware.use_ww = false;
    none.aware.use_wg = false;
    out.push(("none-of-three".to_string(), none));

    let mut linear_sigma = base.clone();
    linear_sigma.aware.linear_sigma = true;
    out.push(("linear-sigma".to_string(), linear_sigma));

    let mut frozen = base.clone();
    frozen.aware.freeze_w = true;
    out.push(("frozen-random-w".to_string(), frozen));

    let mut linear_predictor = base.clone();
    linear_predictor.aware.linear_predictor = true;
    out.push(("linear-predictor".to_string(), linear_predictor));

    for (_, cfg) in out.iter_mut() {
        cfg.aware.normalize();
    }
    out
}

#[derive(Debug, Clone, Serialize)]
pub struct AblationRow {
    pub name: String,
    pub mean_test_metric: f64,
    pub std_test_metric: f64,
    /// Relative change against the base configuration, in percent.
    pub relative_delta_pct: f64,
}

/// Run every ablation configuration and report relative deltas against the
/// base, mirroring the removing/modifying-components table layout.
pub fn run_ablation(dataset: &Dataset, base: &TrainConfig) -> Result<Vec<AblationRow>> {
    let matrix = ablation_matrix(base);
    let mut results = Vec::with_capacity(matrix.len());
    for (name, cfg) in &matrix {
        let run = seed_sweep(dataset, cfg)?;
        results.push((name.clone(), run));
    }
    let base_mean = results[0].1.mean_test_metric;
    Ok(results
        .into_iter()
        .map(|(name, run)| AblationRow {
            name,
            mean_test_metric: run.mean_test_metric,
            std_test_metric: run.std_test_metric,
            relative_delta_pct: if base_mean.abs() > 1e-300 {
                (run.mean_test_metric - base_mean) / base_mean.abs() * 100.0
            } else {
                0.0
            },
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{linear_walk_label_dataset, planted_motif_dataset};

    fn small_config(t: usize, r: usize) -> TrainConfig {
        let mut aware = AwareConfig::new(t, r, r, TaskKind::BinaryClassification);
        aware.alpha = 0.1;
        let mut cfg = TrainConfig::new(aware, Metric::Acc);
        cfg.epochs = 30;
        cfg.patience = 30;
        cfg.batch_size = 16;
        cfg.seeds = vec![0];
        cfg
    }

    #[test]
    fn zero_lr_leaves_parameters_at_initialization() {
        let data = planted_motif_dataset(20, 11).dataset;
        let split = split_dataset(&data, (0.8, 0.1, 0.1), 0).unwrap();
        let mut cfg = small_config(2, 6);
        cfg.lr = 0.0;
        cfg.epochs = 3;
        cfg.patience = 3;
        let init = AwareParams::init(&cfg.aware, &data.schema, 2, derived_seed(0, 1)).unwrap();
        let init_val = evaluate(&init, &cfg.aware, &data, &split.val_idx, Metric::Acc).unwrap();
        let (record, params) = train(&data, &split, &cfg, 0).unwrap();
        assert_eq!(params, init);
        assert_eq!(record.val_metric, init_val);
    }

    #[test]
    fn patience_one_stops_at_epoch_two() {
        let data = planted_motif_dataset(20, 13).dataset;
        let split = split_dataset(&data, (0.8, 0.1, 0.1), 1).unwrap();
        let mut cfg = small_config(2, 4);
        // lr = 0 means the validation metric never changes, so epoch 1 sets
        // the best and epoch 2 exhausts a patience of 1.
        cfg.lr = 0.0;
        cfg.epochs = 10;
        cfg.patience = 1;
        let (record, _) = train(&data, &split, &cfg, 3).unwrap();
        assert_eq!(record.epochs_run, 2);
        assert_eq!(record.best_epoch, 1);
    }

    #[test]
    fn training_is_seed_deterministic() {
        let data = planted_motif_dataset(24, 17).dataset;
        let split = split_dataset(&data, (0.8, 0.1, 0.1), 2).unwrap();
        let mut cfg = small_config(2, 5);
        cfg.epochs = 5;
        cfg.patience = 5;
        let (a, pa) = train(&data, &split, &cfg, 9).unwrap();
        let (b, pb) = train(&data, &split, &cfg, 9).unwrap();
        assert_eq!(pa, pb);
        assert_eq!(a.train_loss_history, b.train_loss_history);
        assert_eq!(a.test_metric, b.test_metric);
    }

    #[test]
    fn test_metric_reported_at_best_validation_epoch() {
        let data = linear_walk_label_dataset(40, 23, 2, 2).unwrap();
        let split = split_dataset(&data, (0.8, 0.1, 0.1), 4).unwrap();
        let mut cfg = small_config(2, 6);
        cfg.epochs = 15;
        cfg.patience = 15;
        let (record, _) = train(&data, &split, &cfg, 5).unwrap();
        let best_from_history = record
            .val_history
            .iter()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(record.val_metric, best_from_history);
        let first_best = record
            .val_history
            .iter()
            .position(|&v| v == best_from_history)
            .unwrap()
            + 1;
        assert_eq!(record.best_epoch, first_best);
    }

    #[test]
    fn loss_decreases_on_single_repeated_graph() {
        let base = planted_motif_dataset(2, 29).dataset;
        let graphs: Vec<_> = (0..8).map(|_| base.graphs[0].clone()).collect();
        let data = Dataset {
            schema: base.schema.clone(),
            graphs,
            task_kind: base.task_kind,
        };
        let split = SplitSpec {
            train_idx: (0..6).collect(),
            val_idx: vec![6],
            test_idx: vec![7],
            seed: 0,
        };
        let mut cfg = small_config(2, 4);
        cfg.lr = 1e-3;
        cfg.epochs = 10;
        cfg.patience = 10;
        cfg.batch_size = 6;
        let (record, _) = train(&data, &split, &cfg, 7).unwrap();
        for w in record.train_loss_history.windows(2) {
            assert!(w[1] <= w[0] + 1e-12, "loss went up: {:?}", w);
        }
    }

    #[test]
    fn separable_synthetic_task_is_learned() {
        let data = linear_walk_label_dataset(60, 31, 2, 2).unwrap();
        // Validate on the training set: the claim under test is that the
        // model can fit the planted linear labels.
        let split = SplitSpec {
            train_idx: (0..48).collect(),
            val_idx: (0..48).collect(),
            test_idx: (48..60).collect(),
            seed: 0,
        };
        let mut cfg = small_config(2, 8);
        cfg.epochs = 200;
        cfg.patience = 200;
        cfg.lr = 3e-3;
        let (_, params) = train(&data, &split, &cfg, 1).unwrap();
        let train_acc = evaluate(&params, &cfg.aware, &data, &split.train_idx, Metric::Acc)
            .unwrap();
        assert!(train_acc >= 0.99, "training accuracy {train_acc}");
    }

    #[test]
    fn empty_validation_split_is_rejected() {
        let data = planted_motif_dataset(4, 1).dataset;
        let split = SplitSpec {
            train_idx: (0..3).collect(),
            val_idx: vec![],
            test_idx: vec![3],
            seed: 0,
        };
        let cfg = small_config(2, 4);
        assert!(train(&data, &split, &cfg, 0).is_err());
    }

    #[test]
    fn sweep_aggregates_and_is_deterministic() {
        let data = planted_motif_dataset(30, 37).dataset;
        let mut cfg = small_config(2, 4);
        cfg.epochs = 4;
        cfg.patience = 4;
        cfg.seeds = vec![0, 1];
        let a = seed_sweep(&data, &cfg).unwrap();
        let b = seed_sweep(&data, &cfg).unwrap();
        assert_eq!(a.mean_test_metric, b.mean_test_metric);
        assert_eq!(a.records.len(), 2);
        cfg.seeds = vec![0];
        let single = seed_sweep(&data, &cfg).unwrap();
        assert_eq!(single.std_test_metric, 0.0);
    }

    #[test]
    fn hyperparameter_grid_covers_all_candidates() {
        let base = small_config(3, 6);
        let grid = hyperparameter_grid(&base);
        assert_eq!(grid.len(), 216);
        let mut lrs: Vec<f64> = grid.iter().map(|c| c.lr).collect();
        lrs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        lrs.dedup();
        assert_eq!(lrs, vec![1e-4, 1e-3]);
        let mut ts: Vec<usize> = grid.iter().map(|c| c.aware.t).collect();
        ts.sort_unstable();
        ts.dedup();
        assert_eq!(ts, vec![3, 6, 9, 12]);
        assert!(grid.iter().all(|c| c.aware.validate().is_ok()));
        // Every combination appears exactly once.
        let mut keys: Vec<(u64, usize, usize, usize, usize)> = grid
            .iter()
            .map(|c| (c.lr.to_bits(), c.aware.layers, c.aware.t, c.aware.r, c.aware.r_prime))
            .collect();
        keys.sort_unstable();
        keys.dedup();
        assert_eq!(keys.len(), 216);
    }

    #[test]
    fn ablation_matrix_contents() {
        let cfg = small_config(3, 6);
        let matrix = ablation_matrix(&cfg);
        assert_eq!(matrix.len(), 8);
        let by_name: std::collections::BTreeMap<_, _> = matrix.iter().cloned().collect();
        let no_wv = &by_name["no-wv"];
        assert!(!no_wv.aware.use_wv);
        assert_eq!(no_wv.aware.r_prime, no_wv.aware.r);
        let frozen = &by_name["frozen-random-w"];
        assert!(frozen.aware.freeze_w);
        let params = AwareParams::<f64>::init(&frozen.aware, &crate::graph::AttributeSchema::new(vec![3]), 2, 0).unwrap();
        assert!(!params
            .trainable_roles(&frozen.aware)
            .contains(&crate::model::ParamRole::W));
        let linear = &by_name["linear-sigma"];
        assert_eq!(linear.aware.alpha, 1.0);
        let lp = &by_name["linear-predictor"];
        assert_eq!(lp.aware.layers, 1);
        let none = &by_name["none-of-three"];
        assert!(!none.aware.use_wv && !none.aware.use_ww && !none.aware.use_wg);
    }
}

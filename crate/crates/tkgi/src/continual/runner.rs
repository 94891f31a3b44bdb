//! The incremental runner: warm-started training over the task sequence,
//! dual checkpoints, per-step evaluation, and run-directory artifacts.
//!
//! Per task t: grow embedding rows for the task's entities, fold its
//! training quads into the frequency tracker and similarity history, train
//! `epochs_per_task` epochs (emitting the eval checkpoint), evaluate that
//! checkpoint on every test set seen so far, then train `post_eval_epochs`
//! over valid ∪ test (emitting the carry checkpoint that seeds task t+1).
//! Evaluation always scores the eval checkpoint; the carry checkpoint only
//! carries knowledge forward.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::continual::{
    ewc_consolidate, CheckpointPair, FisherInfo, ReplayBuffer, RunConfig, Strategy,
};
use crate::data::{
    unseen_entities, with_inverses, Bundle, EntityId, FrequencyTracker, Quadruple,
};
use crate::enhance::{Enhancer, WorkCounters};
use crate::error::{Error, Result};
use crate::eval::{
    bucketize, forgetting_curve, inductive_subset, metrics, save_rank_context_unused,
};
use crate::model::{
    apply_step, loss_and_grads, sample_negatives, save_checkpoint, Checkpoint, ModelParams,
    OptimizerState, TrainBatch,
};
use crate::rng::{stream_rng, Stream};
use crate::sampling::{two_phase_sample, SamplerConfig};

/// Provenance written to `run.json` alongside the resolved configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunMetadata {
    pub config: RunConfig,
    pub seed: u64,
    /// SHA-256 over the input bundle's files.
    pub input_hash: String,
    pub num_entities: usize,
    pub num_relations: usize,
    pub num_tasks: usize,
    /// Embedding-row initialization rule.
    pub init_rule: String,
    /// How subject prediction is realized.
    pub subject_prediction: String,
}

/// Everything an incremental run produces.
#[derive(Debug)]
pub struct RunOutput {
    pub task_metrics: Vec<crate::eval::TaskMetrics>,
    pub checkpoints: Vec<CheckpointPair>,
    pub curve_rows: Vec<crate::eval::CurveCsvRow>,
    pub bucket_rows: Vec<crate::eval::BucketCsvRow>,
    pub bucket_report: crate::eval::BucketReport,
    /// Forgetting curve per metric name, computed from time-filtered ranks.
    pub forgetting: BTreeMap<String, crate::eval::ForgettingCurve>,
    /// Mean time-filtered MRR over the per-task validation sets; present
    /// when `eval_valid` was set.
    pub valid_mrr_mean: Option<f64>,
    /// Enhancement work performed across training and evaluation.
    pub counters: WorkCounters,
}

struct TrainerState {
    params: ModelParams,
    opt: OptimizerState,
    enhancer: Enhancer,
    tracker: FrequencyTracker,
    replay: ReplayBuffer,
    fisher: Option<FisherInfo>,
    rng_init: ChaCha8Rng,
    rng_sampler: ChaCha8Rng,
    rng_neg: ChaCha8Rng,
    rng_replay: ChaCha8Rng,
    rng_fisher: ChaCha8Rng,
    counters: WorkCounters,
    step: u64,
}

impl TrainerState {
    fn snapshot(&self, seed: u64) -> Checkpoint {
        Checkpoint {
            params: self.params.clone(),
            optimizer: self.opt.clone(),
            index: self.enhancer.index.clone(),
            tracker: self.tracker.clone(),
            seed,
            step: self.step,
        }
    }
}

fn train_epoch(
    state: &mut TrainerState,
    epoch_quads: &[Quadruple],
    num_relations: usize,
    cfg: &RunConfig,
    apply_enhancement: bool,
    apply_ewc: bool,
) -> Result<()> {
    let examples = with_inverses(epoch_quads, num_relations);
    for chunk in examples.chunks(cfg.model.batch_size) {
        let mut negatives = Vec::with_capacity(chunk.len());
        for pos in chunk {
            negatives.push(sample_negatives(
                &mut state.rng_neg,
                pos,
                cfg.model.negatives,
                state.params.num_entities(),
            )?);
        }
        let batch = TrainBatch::new(chunk.to_vec(), negatives)?;

        let (loss, mut grads) = if apply_enhancement {
            let mut enhancements = Vec::with_capacity(chunk.len());
            let mut overrides = Vec::with_capacity(chunk.len());
            for pos in chunk {
                let e = state.enhancer.enhance(
                    &state.params.entities,
                    pos.subject,
                    pos.relation,
                    pos.time,
                    state.tracker.degree(pos.subject),
                    &mut state.counters,
                )?;
                overrides.push(e.vector.clone());
                enhancements.push(e);
            }
            let (loss, mut grads) = loss_and_grads(&state.params, &batch, Some(&overrides))?;
            let override_grads = std::mem::take(&mut grads.subject_overrides);
            for ((pos, enh), og) in chunk.iter().zip(&enhancements).zip(&override_grads) {
                state.enhancer.backprop(pos.subject, enh, og, &mut grads);
            }
            (loss, grads)
        } else {
            loss_and_grads(&state.params, &batch, None)?
        };

        if !loss.is_finite() {
            return Err(Error::Divergence(format!(
                "loss {loss} at optimizer step {} (lr {}, batch of {})",
                state.step,
                state.opt.learning_rate,
                chunk.len()
            )));
        }
        if apply_ewc {
            if let Some(fisher) = &state.fisher {
                fisher.add_penalty_grads(&state.params, cfg.ewc_strength, &mut grads);
            }
        }
        apply_step(&mut state.params, &mut state.opt, &grads)?;
        state.step += 1;
    }
    Ok(())
}

fn metric_value(s: &crate::eval::MetricSummary, name: &str) -> f64 {
    match name {
        "mrr" => s.mrr,
        "hit1" => s.hit1,
        "hit3" => s.hit3,
        "hit10" => s.hit10,
        _ => unreachable!("unknown metric {name}"),
    }
}

const METRIC_NAMES: [&str; 4] = ["mrr", "hit1", "hit3", "hit10"];

fn rank_set(
    ctx: &crate::eval::RankContext,
    quads: &[Quadruple],
    num_relations: usize,
    counters: &mut WorkCounters,
) -> Result<(Vec<crate::eval::RankResult>, Vec<crate::eval::RankResult>)> {
    let queries = with_inverses(quads, num_relations);
    let mut raw = Vec::with_capacity(queries.len());
    let mut filtered = Vec::with_capacity(queries.len());
    for q in &queries {
        let (r, f) = ctx.rank_both(q, counters)?;
        raw.push(r);
        filtered.push(f);
    }
    Ok((raw, filtered))
}

/// Train and evaluate over the bundle's task sequence. When `out_dir` is
/// given, emits `run.json`, per-task `metrics.json` (and checkpoints when
/// configured), `curve.csv`, and `buckets.csv`. Deterministic: identical
/// bundle + config produce identical outputs, byte for byte.
pub fn incremental_run(
    bundle: &Bundle,
    cfg: &RunConfig,
    out_dir: Option<&Path>,
    input_hash: Option<&str>,
) -> Result<RunOutput> {
    cfg.validate()?;
    if bundle.tasks.is_empty() {
        return Err(Error::Data("bundle has no tasks".into()));
    }
    let num_relations = bundle.meta.num_relations;
    let bucket_width = if cfg.model.bucket_width > 0 {
        cfg.model.bucket_width
    } else {
        bundle.meta.config.window_days.max(1) as i64
    };
    let total_end = bundle.meta.time_range.1.max(1);
    let num_buckets = (total_end + bucket_width - 1) / bucket_width;

    let mut rng_init = stream_rng(cfg.seed, Stream::Init);
    let params = ModelParams::init(
        num_relations,
        num_buckets.max(1) as usize,
        bucket_width,
        &cfg.model,
        &mut rng_init,
    )?;
    let opt = OptimizerState::new(&params, cfg.model.learning_rate, cfg.model.weight_decay);
    let mut state = TrainerState {
        params,
        opt,
        enhancer: Enhancer::new(cfg.enhancement.clone())?,
        tracker: FrequencyTracker::new(),
        replay: ReplayBuffer::new(cfg.replay_buffer_size)?,
        fisher: None,
        rng_init,
        rng_sampler: stream_rng(cfg.seed, Stream::Sampler),
        rng_neg: stream_rng(cfg.seed, Stream::Negatives),
        rng_replay: stream_rng(cfg.seed, Stream::Replay),
        rng_fisher: stream_rng(cfg.seed, Stream::Fisher),
        counters: WorkCounters::default(),
        step: 0,
    };

    let all_quads: Vec<Quadruple> = bundle.tasks.iter().flat_map(|t| t.all()).collect();
    let filter = crate::eval::FilterSet::build(with_inverses(&all_quads, num_relations));
    let snapshots = bundle.snapshots();
    let sampler_cfg = SamplerConfig {
        alpha: if cfg.strategy.uses_weighted_sampling() {
            cfg.sampler.alpha
        } else {
            0.0
        },
        ..cfg.sampler.clone()
    };

    if let Some(dir) = out_dir {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let meta = RunMetadata {
            config: cfg.clone(),
            seed: cfg.seed,
            input_hash: input_hash.unwrap_or("unavailable").to_string(),
            num_entities: bundle.meta.num_entities,
            num_relations,
            num_tasks: bundle.tasks.len(),
            init_rule: format!(
                "uniform in [-{0:.6}, {0:.6}] (0.5/sqrt(d)), seeded, applied to fresh rows on growth",
                cfg.model.init_scale()
            ),
            subject_prediction: format!(
                "inverse relations: relation table holds {} rows ({} raw + {} inverse)",
                2 * num_relations,
                num_relations,
                num_relations
            ),
        };
        let path = dir.join("run.json");
        fs::write(&path, serde_json::to_string_pretty(&meta)?)
            .map_err(|e| Error::io(&path, e))?;
    }

    let t_total = bundle.tasks.len();
    let mut freq_snapshots: Vec<Vec<u64>> = Vec::new();
    let mut inductive_union: Vec<Quadruple> = Vec::new();
    let mut task_metrics: Vec<crate::eval::TaskMetrics> = Vec::new();
    let mut checkpoints: Vec<CheckpointPair> = Vec::new();
    let mut valid_mrrs: Vec<f64> = Vec::new();
    let mut bucket_entries: Vec<(crate::eval::RankResult, u64)> = Vec::new();

    for (idx, task) in bundle.tasks.iter().enumerate() {
        let t = idx + 1;

        let unseen = unseen_entities(bundle.meta.num_entities, &snapshots[..idx], &task.train);
        let inductive = inductive_subset(&task.test, &unseen, cfg.inductive_subject_only);
        inductive_union.extend_from_slice(&inductive);

        let max_id = task
            .all()
            .iter()
            .map(|q| q.subject.max(q.object))
            .max()
            .unwrap_or(0);
        let new_total = state.params.num_entities().max(max_id + 1);
        state
            .params
            .grow_entities(new_total, cfg.model.init_scale(), &mut state.rng_init);
        state.opt.grow_entities(new_total);

        state.tracker.observe(&task.train);
        freq_snapshots.push(state.tracker.freq_table().to_vec());
        for q in with_inverses(&task.train, num_relations) {
            state.enhancer.record(&q)?;
        }

        if cfg.strategy.trains_at(t) && cfg.epochs_per_task > 0 && !task.train.is_empty() {
            for _ in 0..cfg.epochs_per_task {
                let mut epoch = two_phase_sample(
                    &task.train,
                    &state.tracker,
                    &sampler_cfg,
                    &mut state.rng_sampler,
                )?;
                if cfg.strategy.uses_replay() {
                    epoch = state
                        .replay
                        .mix(epoch, cfg.replay_fraction, &mut state.rng_replay)?;
                }
                let apply_ewc =
                    cfg.strategy.uses_ewc() && cfg.ewc_strength > 0.0 && state.fisher.is_some();
                train_epoch(
                    &mut state,
                    &epoch,
                    num_relations,
                    cfg,
                    cfg.strategy.uses_enhancement(),
                    apply_ewc,
                )?;
            }
        }

        let eval_ckpt = state.snapshot(cfg.seed);

        // --- evaluate the eval checkpoint on every test set seen so far ---
        let mut eval_counters = WorkCounters::default();
        {
            let enhancer_view;
            let enhancer_ref = if cfg.strategy.uses_enhancement() {
                enhancer_view =
                    Enhancer::with_index(cfg.enhancement.clone(), eval_ckpt.index.clone())?;
                Some(&enhancer_view)
            } else {
                None
            };
            let degree_of = |e: EntityId| eval_ckpt.tracker.degree(e);
            let ctx = crate::eval::RankContext {
                params: &eval_ckpt.params,
                enhancer: enhancer_ref,
                filter: &filter,
                degree_of: &degree_of,
            };

            let mut per_set_raw = Vec::with_capacity(t);
            let mut per_set_filtered = Vec::with_capacity(t);
            let mut extra_raw = BTreeMap::new();
            let mut extra_filtered = BTreeMap::new();
            for j in 1..=t {
                let (raw, filtered) = rank_set(
                    &ctx,
                    &bundle.tasks[j - 1].test,
                    num_relations,
                    &mut eval_counters,
                )?;
                per_set_raw.push(metrics(&raw)?);
                per_set_filtered.push(metrics(&filtered)?);
                if t == t_total {
                    let freqs = &freq_snapshots[j - 1];
                    for r in &filtered {
                        let freq = freqs.get(r.query.subject).copied().unwrap_or(0);
                        bucket_entries.push((*r, freq));
                    }
                }
            }
            if !inductive.is_empty() {
                let (raw, filtered) =
                    rank_set(&ctx, &inductive, num_relations, &mut eval_counters)?;
                extra_raw.insert("inductive".to_string(), metrics(&raw)?);
                extra_filtered.insert("inductive".to_string(), metrics(&filtered)?);
            }
            if t == t_total && !inductive_union.is_empty() {
                let (raw, filtered) =
                    rank_set(&ctx, &inductive_union, num_relations, &mut eval_counters)?;
                extra_raw.insert("inductive_union".to_string(), metrics(&raw)?);
                extra_filtered.insert("inductive_union".to_string(), metrics(&filtered)?);
            }
            if cfg.eval_valid {
                let (raw, filtered) =
                    rank_set(&ctx, &task.valid, num_relations, &mut eval_counters)?;
                let filtered_summary = metrics(&filtered)?;
                valid_mrrs.push(filtered_summary.mrr);
                extra_raw.insert("valid".to_string(), metrics(&raw)?);
                extra_filtered.insert("valid".to_string(), filtered_summary);
            }
            task_metrics.push(crate::eval::TaskMetrics {
                task: t,
                checkpoint: "eval".to_string(),
                raw: crate::eval::MetricReport::from_test_sets(&per_set_raw, extra_raw)?,
                time_filtered: crate::eval::MetricReport::from_test_sets(
                    &per_set_filtered,
                    extra_filtered,
                )?,
            });
        }
        state.counters.rows_retrieved += eval_counters.rows_retrieved;
        state.counters.mul_adds += eval_counters.mul_adds;

        // --- carry phase: absorb valid ∪ test before the next task ---
        let carry_data: Vec<Quadruple> = task
            .valid
            .iter()
            .chain(task.test.iter())
            .copied()
            .collect();
        state.tracker.observe(&carry_data);
        for q in with_inverses(&carry_data, num_relations) {
            state.enhancer.record(&q)?;
        }
        if cfg.strategy.trains_at(t) && cfg.post_eval_epochs > 0 && !carry_data.is_empty() {
            for _ in 0..cfg.post_eval_epochs {
                let epoch = two_phase_sample(
                    &carry_data,
                    &state.tracker,
                    &sampler_cfg,
                    &mut state.rng_sampler,
                )?;
                let apply_ewc =
                    cfg.strategy.uses_ewc() && cfg.ewc_strength > 0.0 && state.fisher.is_some();
                train_epoch(
                    &mut state,
                    &epoch,
                    num_relations,
                    cfg,
                    cfg.strategy.uses_enhancement(),
                    apply_ewc,
                )?;
            }
        }

        if cfg.strategy.uses_ewc() && cfg.ewc_strength > 0.0 && !task.train.is_empty() {
            let sample: Vec<Quadruple> = (0..cfg.ewc_sample_size)
                .map(|_| task.train[state.rng_fisher.gen_range(0..task.train.len())])
                .collect();
            state.fisher = Some(ewc_consolidate(
                &state.params,
                state.fisher.take(),
                &sample,
                num_relations,
                cfg.model.negatives,
                &mut state.rng_fisher,
            )?);
        }
        if cfg.strategy.uses_replay() {
            state.replay.extend(&task.train, &mut state.rng_replay);
        }

        let carry_ckpt = state.snapshot(cfg.seed);
        if let Some(dir) = out_dir {
            let tdir = dir.join(format!("task_{t}"));
            fs::create_dir_all(&tdir).map_err(|e| Error::io(&tdir, e))?;
            crate::eval::write_task_metrics(tdir.join("metrics.json"), &task_metrics[idx])?;
            if cfg.save_checkpoints {
                save_checkpoint(tdir.join("checkpoint.eval"), &eval_ckpt)?;
                save_checkpoint(tdir.join("checkpoint.carry"), &carry_ckpt)?;
            }
        }
        checkpoints.push(CheckpointPair {
            eval: eval_ckpt,
            carry: carry_ckpt,
        });
    }

    // --- forgetting curves and flat report rows ---
    let strategy_name = cfg.strategy.name().to_string();
    let mut forgetting = BTreeMap::new();
    for name in METRIC_NAMES {
        let matrix: Vec<Vec<f64>> = task_metrics
            .iter()
            .enumerate()
            .map(|(ti, tm)| {
                (1..=ti + 1)
                    .map(|j| metric_value(&tm.time_filtered.per_set[&format!("test_{j}")], name))
                    .collect()
            })
            .collect();
        forgetting.insert(name.to_string(), forgetting_curve(matrix)?);
    }

    let mut curve_rows = Vec::new();
    for (ti, tm) in task_metrics.iter().enumerate() {
        let t = ti + 1;
        for j in 1..=t {
            let set = format!("test_{j}");
            let summary = &tm.time_filtered.per_set[&set];
            for name in METRIC_NAMES {
                curve_rows.push(crate::eval::CurveCsvRow {
                    step: t,
                    eval_set: set.clone(),
                    metric: name.to_string(),
                    value: metric_value(summary, name),
                    strategy: strategy_name.clone(),
                    seed: cfg.seed,
                });
            }
        }
        for name in METRIC_NAMES {
            curve_rows.push(crate::eval::CurveCsvRow {
                step: t,
                eval_set: "average".to_string(),
                metric: name.to_string(),
                value: metric_value(&tm.time_filtered.average, name),
                strategy: strategy_name.clone(),
                seed: cfg.seed,
            });
        }
    }

    let bucket_report = bucketize(&bucket_entries, &cfg.buckets)?;
    let mut bucket_rows = Vec::new();
    for row in &bucket_report.rows {
        if let Some(summary) = &row.summary {
            for name in METRIC_NAMES {
                bucket_rows.push(crate::eval::BucketCsvRow {
                    bucket_lo: row.lo,
                    bucket_hi: row.hi,
                    metric: name.to_string(),
                    value: metric_value(summary, name),
                    count: row.count,
                    strategy: strategy_name.clone(),
                    seed: cfg.seed,
                });
            }
        }
    }

    if let Some(dir) = out_dir {
        crate::eval::write_curve_csv(dir.join("curve.csv"), &curve_rows)?;
        crate::eval::write_buckets_csv(dir.join("buckets.csv"), &bucket_rows)?;
    }

    let valid_mrr_mean = if valid_mrrs.is_empty() {
        None
    } else {
        Some(valid_mrrs.iter().sum::<f64>() / valid_mrrs.len() as f64)
    };
    Ok(RunOutput {
        task_metrics,
        checkpoints,
        curve_rows,
        bucket_rows,
        bucket_report,
        forgetting,
        valid_mrr_mean,
        counters: state.counters,
    })
}

/// SHA-256 over a bundle directory's files (meta.json and every snapshot
/// TSV, in a fixed order).
pub fn hash_bundle_dir(dir: impl AsRef<Path>) -> Result<String> {
    let dir = dir.as_ref();
    let meta_path = dir.join("meta.json");
    let meta_text = fs::read(&meta_path).map_err(|e| Error::io(&meta_path, e))?;
    let meta: crate::data::BundleMeta = serde_json::from_slice(&meta_text)?;
    let mut hasher = Sha256::new();
    hasher.update(&meta_text);
    for sm in &meta.snapshots {
        for split in ["train", "valid", "test"] {
            let path = dir.join(format!("snapshot_{}/{split}.tsv", sm.index));
            let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
            hasher.update(path.file_name().unwrap().to_string_lossy().as_bytes());
            hasher.update(bytes);
        }
    }
    Ok(format!("{:x}", hasher.finalize()))
}

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use super::baselines::SelectorKind;
use super::config::SearchConfig;
use super::derive_seed;
use super::finetune::{draw_trials, finetune, FinetuneOutcome};
use super::stages::{evaluate_kernel, label_pool, rank_and_select, CandidateRecord, LabeledLayout, Stage};
use crate::circuit::{enumerate_block_space, sample_layout, CircuitLayout};
use crate::data::{
    apply_selector, identity_selector, load_csv, mrmr_select, pca_reduce, stratified_split,
    LabelColumn, TabularDataset,
};
use crate::error::{Error, Result};
use crate::predictor::{
    init_model, load_checkpoint, load_samples, save_checkpoint, save_samples, score_layouts,
    train_predictor, PredictorSample,
};

pub const TOOL_NAME: &str = "qkernel";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Stage names in execution order; also the CLI subcommand names.
pub const STAGE_NAMES: [&str; 7] = [
    "select-features",
    "sample-pool",
    "label-pool",
    "train-predictor",
    "rank",
    "finetune",
    "evaluate",
];

const CONFIG: &str = "config.json";
const SELECTOR: &str = "selector.json";
const TRAIN: &str = "data/train.csv";
const TEST: &str = "data/test.csv";
const POOL: &str = "pool";
const LABELS: &str = "pool/labels.csv";
const PREDICTOR_DATA: &str = "pool/predictor_dataset.csv";
const CHECKPOINT: &str = "predictor.ckpt";
const CANDIDATES: &str = "candidates.csv";
const CANDIDATE_DIR: &str = "candidates";
const FINETUNE_DIR: &str = "finetune";
const RECORDS: &str = "records.csv";
const REPORT: &str = "report.csv";
const CHOSEN: &str = "chosen.json";
const MANIFEST: &str = "manifest.json";

/// Directory holding every artifact of one search.
#[derive(Clone, Debug)]
pub struct RunDir {
    root: PathBuf,
}

impl RunDir {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn path(&self, rel: &str) -> PathBuf {
        self.root.join(rel)
    }

    fn require(&self, rel: &str) -> Result<PathBuf> {
        let p = self.path(rel);
        if p.exists() {
            Ok(p)
        } else {
            Err(Error::MissingArtifact(p))
        }
    }

    /// Refuses to touch existing outputs unless `force`, in which case they
    /// are removed first.
    fn claim(&self, outputs: &[&str], force: bool) -> Result<()> {
        for rel in outputs {
            let p = self.path(rel);
            if !p.exists() {
                continue;
            }
            if !force {
                return Err(Error::Exists(p));
            }
            if p.is_dir() {
                std::fs::remove_dir_all(&p)?;
            } else {
                std::fs::remove_file(&p)?;
            }
        }
        std::fs::create_dir_all(&self.root)?;
        Ok(())
    }

    pub fn load_config(&self) -> Result<SearchConfig> {
        SearchConfig::load(&self.require(CONFIG)?)
    }

    pub fn load_split(&self) -> Result<(TabularDataset, TabularDataset)> {
        let label = LabelColumn::Name("label".into());
        Ok((
            load_csv(&self.require(TRAIN)?, &label)?,
            load_csv(&self.require(TEST)?, &label)?,
        ))
    }

    pub fn load_manifest(&self) -> Result<RunManifest> {
        let p = self.require(MANIFEST)?;
        Ok(serde_json::from_str(&std::fs::read_to_string(&p)?)?)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Artifact {
    pub path: String,
    pub sha256: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageEntry {
    pub name: String,
    pub seconds: f64,
    pub artifacts: Vec<Artifact>,
    pub notes: BTreeMap<String, Value>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub seed: u64,
    pub max_width: usize,
    pub config: SearchConfig,
    pub stages: Vec<StageEntry>,
    /// SHA-256 of this manifest with every `seconds` zeroed and this field
    /// empty; equal configurations and seeds give equal hashes.
    pub content_hash: String,
}

impl RunManifest {
    fn new(cfg: &SearchConfig) -> Self {
        Self {
            tool: TOOL_NAME.into(),
            version: TOOL_VERSION.into(),
            seed: cfg.seed,
            max_width: cfg.max_width(),
            config: cfg.clone(),
            stages: Vec::new(),
            content_hash: String::new(),
        }
    }

    pub fn compute_hash(&self) -> String {
        let mut bare = self.clone();
        bare.content_hash.clear();
        for s in &mut bare.stages {
            s.seconds = 0.0;
        }
        hex::encode(Sha256::digest(serde_json::to_vec(&bare).expect("manifest serializes")))
    }

    /// Checks every recorded artifact against the file on disk.
    pub fn verify(&self, run: &RunDir) -> Result<()> {
        for stage in &self.stages {
            for a in &stage.artifacts {
                let p = run.path(&a.path);
                if !p.exists() {
                    return Err(Error::MissingArtifact(p));
                }
                if file_sha256(&p)? != a.sha256 {
                    return Err(Error::Format {
                        path: p,
                        msg: "hash does not match manifest".into(),
                    });
                }
            }
        }
        Ok(())
    }
}

pub fn file_sha256(path: &Path) -> Result<String> {
    Ok(hex::encode(Sha256::digest(std::fs::read(path)?)))
}

fn record_stage(
    run: &RunDir,
    cfg: &SearchConfig,
    name: &str,
    artifacts: &[String],
    started: Instant,
    notes: BTreeMap<String, Value>,
) -> Result<()> {
    let mut manifest = match run.load_manifest() {
        Ok(m) if name != STAGE_NAMES[0] => m,
        _ => RunManifest::new(cfg),
    };
    let artifacts = artifacts
        .iter()
        .map(|rel| {
            Ok(Artifact {
                path: rel.clone(),
                sha256: file_sha256(&run.path(rel))?,
            })
        })
        .collect::<Result<_>>()?;
    let entry = StageEntry {
        name: name.to_string(),
        seconds: started.elapsed().as_secs_f64(),
        artifacts,
        notes,
    };
    manifest.stages.retain(|s| s.name != name);
    manifest.stages.push(entry);
    let order = |n: &str| STAGE_NAMES.iter().position(|s| *s == n).unwrap_or(usize::MAX);
    manifest.stages.sort_by_key(|s| order(&s.name));
    manifest.content_hash = manifest.compute_hash();
    std::fs::write(run.path(MANIFEST), serde_json::to_string_pretty(&manifest)?)?;
    Ok(())
}

fn write_layout(path: &Path, layout: &CircuitLayout) -> Result<()> {
    std::fs::write(path, layout.to_json())?;
    Ok(())
}

fn read_layout(path: &Path) -> Result<CircuitLayout> {
    CircuitLayout::from_json(&std::fs::read_to_string(path)?).map_err(|e| Error::Format {
        path: path.to_path_buf(),
        msg: e.to_string(),
    })
}

fn join_f64(values: &[f64]) -> String {
    values.iter().map(|v| format!("{v:?}")).collect::<Vec<_>>().join(";")
}

fn join_usize(values: &[usize]) -> String {
    values.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(";")
}

/// `count` layouts drawn with per-layout generators derived from `tag`; each
/// layout draws its `l0` uniformly from the configured set.
pub fn sample_layouts(cfg: &SearchConfig, tag: &str, count: usize) -> Result<Vec<CircuitLayout>> {
    (0..count)
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, tag, i as u64, 0));
            let l0 = cfg.l0[rng.gen_range(0..cfg.l0.len())];
            sample_layout(cfg.n, l0, cfg.p, cfg.strategy(), &mut rng)
        })
        .collect()
}

/// The `M′` layouts to score: the enumerated block space for every `l0`
/// when `exhaustive`, otherwise a fresh sample.
pub fn scoring_pool(cfg: &SearchConfig) -> Result<Vec<CircuitLayout>> {
    if cfg.exhaustive {
        let mut out = Vec::new();
        for &l0 in &cfg.l0 {
            out.extend(enumerate_block_space(cfg.n, l0, cfg.p)?);
        }
        Ok(out)
    } else {
        sample_layouts(cfg, "score", cfg.m_prime)
    }
}

fn stage<T>(name: &str, f: impl FnOnce() -> Result<T>) -> Result<T> {
    log::info!("stage {name} started");
    let out = f().map_err(|e| e.in_stage(name))?;
    log::info!("stage {name} finished");
    Ok(out)
}

/// Splits, fits the feature selector on the training half and stores both
/// halves as rotation angles.
pub fn select_features(run: &RunDir, cfg: &SearchConfig, data: &TabularDataset, force: bool) -> Result<()> {
    stage(STAGE_NAMES[0], || {
        cfg.validate()?;
        run.claim(&[CONFIG, SELECTOR, "data", MANIFEST], force)?;
        let started = Instant::now();
        let (train, test) = stratified_split(data, cfg.train_fraction, derive_seed(cfg.seed, "split", 0, 0))?;
        let selector = match cfg.selector {
            SelectorKind::Mrmr => mrmr_select(&train, cfg.p, cfg.bins)?,
            SelectorKind::Pca => pca_reduce(&train, cfg.p)?,
            SelectorKind::None if cfg.p == train.dim() => identity_selector(&train)?,
            SelectorKind::None => {
                return Err(Error::Argument(format!(
                    "selector `none` needs p = d = {}, got p = {}",
                    train.dim(),
                    cfg.p
                )))
            }
        };
        std::fs::create_dir_all(run.path("data"))?;
        std::fs::write(run.path(CONFIG), cfg.to_json())?;
        selector.save(&run.path(SELECTOR))?;
        apply_selector(&selector, &train)?.write_csv(&run.path(TRAIN))?;
        apply_selector(&selector, &test)?.write_csv(&run.path(TEST))?;
        let notes = BTreeMap::from([
            ("train_rows".to_string(), json!(train.len())),
            ("test_rows".to_string(), json!(test.len())),
        ]);
        record_stage(
            run,
            cfg,
            STAGE_NAMES[0],
            &[CONFIG, SELECTOR, TRAIN, TEST].map(String::from),
            started,
            notes,
        )
    })
}

/// Reads the configured dataset file, then runs [`select_features`].
pub fn select_features_from_file(run: &RunDir, cfg: &SearchConfig, force: bool) -> Result<()> {
    let path = cfg
        .data
        .as_ref()
        .ok_or_else(|| Error::Argument("no dataset path configured (`data`)".into()))?;
    let label: LabelColumn = cfg.label_column.parse().expect("infallible");
    let data = load_csv(path, &label).map_err(|e| e.in_stage(STAGE_NAMES[0]))?;
    select_features(run, cfg, &data, force)
}

fn pool_file(i: usize) -> String {
    format!("{POOL}/layout_{i:05}.json")
}

pub fn sample_pool(run: &RunDir, cfg: &SearchConfig, force: bool) -> Result<()> {
    stage(STAGE_NAMES[1], || {
        cfg.validate()?;
        run.claim(&[POOL], force)?;
        let started = Instant::now();
        let layouts = sample_layouts(cfg, "pool", cfg.m_pool)?;
        std::fs::create_dir_all(run.path(POOL))?;
        let mut files = Vec::with_capacity(layouts.len());
        for (i, l) in layouts.iter().enumerate() {
            files.push(pool_file(i));
            write_layout(&run.path(&pool_file(i)), l)?;
        }
        record_stage(run, cfg, STAGE_NAMES[1], &files, started, BTreeMap::new())
    })
}

pub fn load_pool(run: &RunDir) -> Result<Vec<CircuitLayout>> {
    let dir = run.require(POOL)?;
    let mut names: Vec<PathBuf> = std::fs::read_dir(&dir)?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<_>>()?;
    names.retain(|p| {
        p.file_name()
            .and_then(|n| n.to_str())
            .is_some_and(|n| n.starts_with("layout_") && n.ends_with(".json"))
    });
    names.sort();
    names.iter().map(|p| read_layout(p)).collect()
}

pub fn label_pool_stage(run: &RunDir, cfg: &SearchConfig, force: bool) -> Result<()> {
    stage(STAGE_NAMES[2], || {
        run.claim(&[LABELS, PREDICTOR_DATA], force)?;
        let started = Instant::now();
        let layouts = load_pool(run)?;
        let (train, _) = run.load_split()?;
        let (labeled, failures) = label_pool(&layouts, &train, cfg.noise.as_ref());
        if labeled.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if failures > 0 {
            log::warn!("{failures} pool layouts dropped during labeling");
        }
        let mut w = csv::Writer::from_path(run.path(LABELS))?;
        w.write_record(["index", "hash", "kta", "target"])?;
        let mut samples = Vec::with_capacity(labeled.len());
        for l in &labeled {
            let s = l.sample(cfg.max_width())?;
            w.write_record([
                l.index.to_string(),
                l.hash.clone(),
                format!("{:?}", l.kta),
                format!("{:?}", s.target),
            ])?;
            samples.push(s);
        }
        w.flush()?;
        save_samples(&samples, &run.path(PREDICTOR_DATA))?;
        let notes = BTreeMap::from([
            ("labeled".to_string(), json!(labeled.len())),
            ("failures".to_string(), json!(failures)),
        ]);
        record_stage(
            run,
            cfg,
            STAGE_NAMES[2],
            &[LABELS, PREDICTOR_DATA].map(String::from),
            started,
            notes,
        )
    })
}

/// Labeled pool entries as `(pool index, hash, KTA)`.
pub fn load_labels(run: &RunDir) -> Result<Vec<(usize, String, f64)>> {
    let path = run.require(LABELS)?;
    let mut r = csv::Reader::from_path(&path)?;
    r.records()
        .map(|rec| {
            let rec = rec?;
            let bad = || Error::Format {
                path: path.clone(),
                msg: format!("bad record {rec:?}"),
            };
            Ok((
                rec[0].parse().map_err(|_| bad())?,
                rec[1].to_string(),
                rec[2].parse().map_err(|_| bad())?,
            ))
        })
        .collect()
}

pub fn train_predictor_stage(run: &RunDir, cfg: &SearchConfig, force: bool) -> Result<()> {
    stage(STAGE_NAMES[3], || {
        run.claim(&[CHECKPOINT], force)?;
        let started = Instant::now();
        let samples: Vec<PredictorSample> = load_samples(&run.require(PREDICTOR_DATA)?)?;
        let model = init_model(cfg.l_max(), derive_seed(cfg.seed, "predictor-init", 0, 0))?;
        let trained = train_predictor(
            model,
            &samples,
            &cfg.predictor_training(derive_seed(cfg.seed, "predictor-shuffle", 0, 0)),
        )?;
        save_checkpoint(&trained, &run.path(CHECKPOINT))?;
        let notes = BTreeMap::from([
            ("samples".to_string(), json!(samples.len())),
            ("final_loss".to_string(), json!(trained.loss_curve.last())),
        ]);
        record_stage(run, cfg, STAGE_NAMES[3], &[CHECKPOINT.to_string()], started, notes)
    })
}

/// One selected candidate as persisted by the rank stage.
#[derive(Clone, Debug, PartialEq)]
pub struct CandidateEntry {
    pub rank: usize,
    /// `predicted` for predictor picks, `carried` for the best labeled layout.
    pub source: String,
    pub hash: String,
    pub predicted_kta: f64,
    pub kta_train: f64,
    pub layout: CircuitLayout,
}

fn candidate_file(rank: usize) -> String {
    format!("{CANDIDATE_DIR}/layout_{rank:03}.json")
}

pub fn rank_stage(run: &RunDir, cfg: &SearchConfig, force: bool) -> Result<()> {
    stage(STAGE_NAMES[4], || {
        run.claim(&[CANDIDATES, CANDIDATE_DIR], force)?;
        let started = Instant::now();
        let model = load_checkpoint(&run.require(CHECKPOINT)?)?;
        let pool = scoring_pool(cfg)?;
        let max_width = cfg.max_width();
        let ranked = rank_and_select(&model, &pool, max_width, cfg.k)?;
        let mut picks: Vec<(String, CircuitLayout, f64)> = ranked
            .iter()
            .map(|r| ("predicted".to_string(), pool[r.index].clone(), r.predicted))
            .collect();
        if cfg.keep_best_labeled {
            let labels = load_labels(run)?;
            let best = labels
                .iter()
                .fold(None::<&(usize, String, f64)>, |acc, l| match acc {
                    Some(a) if a.2 >= l.2 => Some(a),
                    _ => Some(l),
                });
            if let Some((index, hash, _)) = best {
                if !picks.iter().any(|(_, l, _)| l.hash() == *hash) {
                    let layout = read_layout(&run.require(&pool_file(*index))?)?;
                    let predicted = score_layouts(&model, std::slice::from_ref(&layout), max_width)?[0];
                    let last = picks.len() - 1;
                    picks[last] = ("carried".to_string(), layout, predicted);
                }
            }
        }
        let (train, _) = run.load_split()?;
        let layouts: Vec<CircuitLayout> = picks.iter().map(|p| p.1.clone()).collect();
        let (labeled, failures) = label_pool(&layouts, &train, cfg.noise.as_ref());
        if failures > 0 {
            return Err(Error::Numeric(format!("{failures} candidate kernels failed")));
        }
        std::fs::create_dir_all(run.path(CANDIDATE_DIR))?;
        let mut w = csv::Writer::from_path(run.path(CANDIDATES))?;
        w.write_record(["rank", "source", "hash", "predicted_kta", "kta_train"])?;
        let mut files = vec![CANDIDATES.to_string()];
        for (rank, ((source, layout, predicted), lab)) in picks.iter().zip(&labeled).enumerate() {
            w.write_record([
                rank.to_string(),
                source.clone(),
                lab.hash.clone(),
                format!("{predicted:?}"),
                format!("{:?}", lab.kta),
            ])?;
            write_layout(&run.path(&candidate_file(rank)), layout)?;
            files.push(candidate_file(rank));
        }
        w.flush()?;
        let notes = BTreeMap::from([("scored".to_string(), json!(pool.len()))]);
        record_stage(run, cfg, STAGE_NAMES[4], &files, started, notes)
    })
}

pub fn load_candidates(run: &RunDir) -> Result<Vec<CandidateEntry>> {
    let path = run.require(CANDIDATES)?;
    let mut r = csv::Reader::from_path(&path)?;
    r.records()
        .map(|rec| {
            let rec = rec?;
            let bad = || Error::Format {
                path: path.clone(),
                msg: format!("bad record {rec:?}"),
            };
            let rank: usize = rec[0].parse().map_err(|_| bad())?;
            Ok(CandidateEntry {
                rank,
                source: rec[1].to_string(),
                hash: rec[2].to_string(),
                predicted_kta: rec[3].parse().map_err(|_| bad())?,
                kta_train: rec[4].parse().map_err(|_| bad())?,
                layout: read_layout(&run.require(&candidate_file(rank))?)?,
            })
        })
        .collect()
}

fn best_file(rank: usize) -> String {
    format!("{FINETUNE_DIR}/best_{rank:03}.json")
}

pub fn finetune_stage(run: &RunDir, cfg: &SearchConfig, force: bool) -> Result<()> {
    stage(STAGE_NAMES[5], || {
        run.claim(&[FINETUNE_DIR], force)?;
        let started = Instant::now();
        let candidates = load_candidates(run)?;
        let (train, _) = run.load_split()?;
        let reference = candidates
            .iter()
            .min_by_key(|c| c.layout.total_rotations())
            .ok_or(Error::EmptyDataset)?;
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, "finetune", 0, 0));
        let plans = draw_trials(&reference.layout, cfg.num_theta_trials, &mut rng);
        let ft = cfg.finetune();
        let outcomes: Vec<FinetuneOutcome> = candidates
            .iter()
            .map(|c| finetune(&c.layout, &plans, &train, &ft, cfg.noise.as_ref()))
            .collect::<Result<_>>()?;

        std::fs::create_dir_all(run.path(FINETUNE_DIR))?;
        let trials_path = format!("{FINETUNE_DIR}/trials.csv");
        let traces_path = format!("{FINETUNE_DIR}/traces.csv");
        let mut trials = csv::Writer::from_path(run.path(&trials_path))?;
        trials.write_record(["candidate", "trial", "positions", "theta_init", "best_kta", "best_theta"])?;
        let mut traces = csv::Writer::from_path(run.path(&traces_path))?;
        traces.write_record(["candidate", "trial", "epoch", "kta"])?;
        let mut files = vec![trials_path, traces_path];
        for (c, out) in candidates.iter().zip(&outcomes) {
            for t in &out.trials {
                trials.write_record([
                    c.rank.to_string(),
                    t.trial.to_string(),
                    join_usize(&t.positions),
                    join_f64(&t.theta_init),
                    format!("{:?}", t.best_kta),
                    join_f64(&t.best_theta),
                ])?;
                for (e, k) in t.kta_trace.iter().enumerate() {
                    traces.write_record([
                        c.rank.to_string(),
                        t.trial.to_string(),
                        e.to_string(),
                        format!("{k:?}"),
                    ])?;
                }
            }
            let best = json!({
                "layout": serde_json::from_str::<Value>(&out.layout.to_json())?,
                "theta": out.theta,
                "kta": out.kta,
                "initial_kta": out.initial_kta,
                "best_trial": out.best_trial,
            });
            std::fs::write(run.path(&best_file(c.rank)), serde_json::to_string_pretty(&best)?)?;
            files.push(best_file(c.rank));
        }
        trials.flush()?;
        traces.flush()?;
        let notes = BTreeMap::from([("trials".to_string(), json!(plans.len()))]);
        record_stage(run, cfg, STAGE_NAMES[5], &files, started, notes)
    })
}

/// Fine-tuned layout and parameters of one candidate.
pub fn load_finetuned(run: &RunDir, rank: usize) -> Result<(CircuitLayout, Vec<f64>, f64)> {
    let path = run.require(&best_file(rank))?;
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&path)?)?;
    let bad = |what: &str| Error::Format {
        path: path.clone(),
        msg: format!("missing {what}"),
    };
    let layout = CircuitLayout::from_json(&v.get("layout").ok_or_else(|| bad("layout"))?.to_string())?;
    let theta: Vec<f64> = serde_json::from_value(v.get("theta").ok_or_else(|| bad("theta"))?.clone())?;
    let kta = v.get("kta").and_then(Value::as_f64).ok_or_else(|| bad("kta"))?;
    Ok((layout, theta, kta))
}

/// Result of a complete search.
#[derive(Clone, Debug)]
pub struct SearchOutcome {
    pub records: Vec<CandidateRecord>,
    pub chosen: CandidateRecord,
}

fn record_row(r: &CandidateRecord) -> [String; 9] {
    [
        r.stage.to_string(),
        r.index.to_string(),
        r.layout.hash(),
        r.layout.num_params().to_string(),
        format!("{:?}", r.kta_train),
        r.predicted_kta.map(|p| format!("{p:?}")).unwrap_or_default(),
        format!("{:?}", r.train_accuracy),
        format!("{:?}", r.test_accuracy),
        join_f64(&r.theta),
    ]
}

/// Stage table: one row per metric, one column per stage.
pub fn stage_report(records: &[CandidateRecord]) -> Vec<(String, [String; 3])> {
    let per_stage = |f: &dyn Fn(&[&CandidateRecord]) -> String| -> [String; 3] {
        Stage::ALL.map(|s| {
            let rs: Vec<&CandidateRecord> = records.iter().filter(|r| r.stage == s).collect();
            f(&rs)
        })
    };
    let max_of = |g: fn(&CandidateRecord) -> f64| {
        move |rs: &[&CandidateRecord]| -> String {
            rs.iter()
                .map(|r| g(r))
                .fold(None, |a: Option<f64>, v| Some(a.map_or(v, |a| a.max(v))))
                .map(|v| format!("{v:.6}"))
                .unwrap_or_default()
        }
    };
    vec![
        ("count".into(), per_stage(&|rs| rs.len().to_string())),
        ("best_kta_train".into(), per_stage(&max_of(|r| r.kta_train))),
        ("best_train_accuracy".into(), per_stage(&max_of(|r| r.train_accuracy))),
        ("best_test_accuracy".into(), per_stage(&max_of(|r| r.test_accuracy))),
        (
            "test_accuracy_at_best_kta".into(),
            per_stage(&|rs| {
                rs.iter()
                    .fold(None::<&&CandidateRecord>, |a, r| match a {
                        Some(b) if b.kta_train >= r.kta_train => Some(b),
                        _ => Some(r),
                    })
                    .map(|r| format!("{:.6}", r.test_accuracy))
                    .unwrap_or_default()
            }),
        ),
    ]
}

type Job = (Stage, usize, CircuitLayout, Vec<f64>, Option<f64>);

pub fn evaluate_stage(run: &RunDir, cfg: &SearchConfig, force: bool) -> Result<SearchOutcome> {
    stage(STAGE_NAMES[6], || {
        run.claim(&[RECORDS, REPORT, CHOSEN], force)?;
        let started = Instant::now();
        let (train, test) = run.load_split()?;
        let noise = cfg.noise.as_ref();
        // (stage, index, layout, theta, predicted KTA)
        let mut jobs: Vec<Job> = Vec::new();
        for (index, _, _) in load_labels(run)? {
            let layout = read_layout(&run.require(&pool_file(index))?)?;
            jobs.push((Stage::TrainingPool, index, layout, Vec::new(), None));
        }
        let candidates = load_candidates(run)?;
        for c in &candidates {
            jobs.push((Stage::Candidate, c.rank, c.layout.clone(), Vec::new(), Some(c.predicted_kta)));
        }
        for c in &candidates {
            let (layout, theta, _) = load_finetuned(run, c.rank)?;
            jobs.push((Stage::Finetuned, c.rank, layout, theta, Some(c.predicted_kta)));
        }
        let mut records = Vec::with_capacity(jobs.len());
        let mut max_residual: f64 = 0.0;
        for (stage, index, layout, theta, predicted) in jobs {
            let ev = evaluate_kernel(&layout, &theta, &train, &test, cfg.lambda, noise)?;
            max_residual = max_residual.max(ev.max_residual);
            records.push(CandidateRecord {
                stage,
                index,
                layout,
                theta,
                kta_train: ev.kta_train,
                predicted_kta: predicted,
                train_accuracy: ev.train_accuracy,
                test_accuracy: ev.test_accuracy,
            });
        }
        let mut w = csv::Writer::from_path(run.path(RECORDS))?;
        w.write_record([
            "stage",
            "index",
            "hash",
            "num_params",
            "kta_train",
            "predicted_kta",
            "train_accuracy",
            "test_accuracy",
            "theta",
        ])?;
        for r in &records {
            w.write_record(record_row(r))?;
        }
        w.flush()?;
        let mut w = csv::Writer::from_path(run.path(REPORT))?;
        w.write_record(["metric", "training_pool", "candidate", "finetuned"])?;
        for (metric, cols) in stage_report(&records) {
            w.write_record([metric, cols[0].clone(), cols[1].clone(), cols[2].clone()])?;
        }
        w.flush()?;
        // First maximum in record order: earlier stages win ties.
        let chosen = records
            .iter()
            .fold(None::<&CandidateRecord>, |a, r| match a {
                Some(b) if b.test_accuracy >= r.test_accuracy => Some(b),
                _ => Some(r),
            })
            .cloned()
            .ok_or(Error::EmptyDataset)?;
        let chosen_json = json!({
            "stage": chosen.stage.name(),
            "index": chosen.index,
            "hash": chosen.layout.hash(),
            "layout": serde_json::from_str::<Value>(&chosen.layout.to_json())?,
            "theta": chosen.theta,
            "kta_train": chosen.kta_train,
            "train_accuracy": chosen.train_accuracy,
            "test_accuracy": chosen.test_accuracy,
        });
        std::fs::write(run.path(CHOSEN), serde_json::to_string_pretty(&chosen_json)?)?;
        let notes = BTreeMap::from([("max_fit_residual".to_string(), json!(max_residual))]);
        record_stage(
            run,
            cfg,
            STAGE_NAMES[6],
            &[RECORDS, REPORT, CHOSEN].map(String::from),
            started,
            notes,
        )?;
        Ok(SearchOutcome { records, chosen })
    })
}

/// Every stage in order on `data`, persisting artifacts as it goes.
pub fn run_full_search(
    run: &RunDir,
    cfg: &SearchConfig,
    data: &TabularDataset,
    force: bool,
) -> Result<SearchOutcome> {
    select_features(run, cfg, data, force)?;
    sample_pool(run, cfg, force)?;
    label_pool_stage(run, cfg, force)?;
    train_predictor_stage(run, cfg, force)?;
    rank_stage(run, cfg, force)?;
    finetune_stage(run, cfg, force)?;
    evaluate_stage(run, cfg, force)
}

/// Labeled pool entries joined with their layouts.
pub fn load_labeled_pool(run: &RunDir) -> Result<Vec<LabeledLayout>> {
    load_labels(run)?
        .into_iter()
        .map(|(index, hash, kta)| {
            Ok(LabeledLayout {
                index,
                hash,
                layout: read_layout(&run.require(&pool_file(index))?)?,
                kta,
            })
        })
        .collect()
}

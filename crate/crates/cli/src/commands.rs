//! Subcommand implementations: ingest, prepare, train, transfer, evaluate,
//! report. Batch stages log per-image failures and keep going; the process
//! exit code distinguishes full success from partial success.

use crate::config::{PipelineConfig, StylePolicy};
use anyhow::{bail, Context};
use rayon::prelude::*;
use sonogen_core::imageio::{
    build_manifest, load_pnm, save_pnm, DatasetManifest, DatasetRole, Image,
};
use sonogen_core::iqa::{
    brisque_score, build_regressor_corpus, fit_niqe_model, niqe_score, train_quality_regressor,
};
use sonogen_core::preprocess::{add_speckle_noise, prepare_content, prepare_style, Trimap};
use sonogen_core::simeval::{evaluate_pair, format_4dp, SimilarityParams, SimilarityReport};
use sonogen_core::styletrans::{
    load_checkpoint, save_checkpoint, StyleTransferModel, TrainHyper, Trainer,
};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

/// Flags shared by every subcommand.
#[derive(Debug, Clone, Copy)]
pub struct RunFlags {
    pub seed_override: Option<u64>,
    pub force: bool,
    pub jobs: usize,
}

impl Default for RunFlags {
    fn default() -> Self {
        Self {
            seed_override: None,
            force: false,
            jobs: 1,
        }
    }
}

/// Outcome of a batch command.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CmdStatus {
    Ok,
    /// Some per-image work failed but the batch completed.
    Partial { failures: usize },
}

fn pool(jobs: usize) -> anyhow::Result<rayon::ThreadPool> {
    Ok(rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()?)
}

fn apply_seed(cfg: &PipelineConfig, flags: &RunFlags) -> PipelineConfig {
    let mut cfg = cfg.clone();
    if let Some(seed) = flags.seed_override {
        cfg.seed = seed;
    }
    cfg
}

// ---------------------------------------------------------------------------
// ingest
// ---------------------------------------------------------------------------

pub fn cmd_ingest(cfg: &PipelineConfig, flags: &RunFlags) -> anyhow::Result<CmdStatus> {
    let cfg = apply_seed(cfg, flags);
    cfg.require_dir("content_dir", &cfg.content_dir)?;
    cfg.require_dir("style_dir", &cfg.style_dir)?;
    let content = build_manifest(&cfg.content_dir, DatasetRole::Content)?;
    let style = build_manifest(&cfg.style_dir, DatasetRole::Style)?;
    let dir = cfg.output_dir.join("manifests");
    std::fs::create_dir_all(&dir)?;
    std::fs::write(dir.join("content.csv"), content.to_csv())?;
    std::fs::write(dir.join("style.csv"), style.to_csv())?;
    println!(
        "ingested {} content samples, {} style samples",
        content.count(),
        style.count()
    );
    Ok(CmdStatus::Ok)
}

// ---------------------------------------------------------------------------
// prepare
// ---------------------------------------------------------------------------

fn trimap_for(cfg: &PipelineConfig, stem: &str) -> anyhow::Result<Option<Trimap>> {
    let Some(dir) = &cfg.trimap_dir else {
        return Ok(None);
    };
    let path = dir.join(format!("{stem}.pgm"));
    if !path.is_file() {
        return Ok(None);
    }
    let img = load_pnm(&path).with_context(|| format!("trimap {}", path.display()))?;
    Ok(Some(Trimap::from_image(&img)))
}

pub fn cmd_prepare(cfg: &PipelineConfig, flags: &RunFlags) -> anyhow::Result<CmdStatus> {
    let cfg = apply_seed(cfg, flags);
    cfg.require_dir("content_dir", &cfg.content_dir)?;
    cfg.require_dir("style_dir", &cfg.style_dir)?;
    if let Some(t) = &cfg.trimap_dir {
        cfg.require_dir("trimap_dir", t)?;
    }
    let content = build_manifest(&cfg.content_dir, DatasetRole::Content)?;
    let style = build_manifest(&cfg.style_dir, DatasetRole::Style)?;
    let content_out = cfg.output_dir.join("prepared/content");
    let style_out = cfg.output_dir.join("prepared/style");
    std::fs::create_dir_all(&content_out)?;
    std::fs::create_dir_all(&style_out)?;

    let target = (cfg.target_side(), cfg.target_side());
    let pool = pool(flags.jobs)?;
    let content_results: Vec<anyhow::Result<()>> = pool.install(|| {
        content
            .entries
            .par_iter()
            .enumerate()
            .map(|(i, entry)| {
                let img = entry.load()?;
                let trimap = trimap_for(&cfg, &entry.stem())?;
                let prepared = prepare_content(&img, trimap.as_ref(), cfg.sigma, target)?;
                let name = format!("c{i:04}_{}.pgm", entry.stem());
                save_pnm(&prepared, content_out.join(name))?;
                Ok(())
            })
            .collect()
    });
    let style_results: Vec<anyhow::Result<()>> = pool.install(|| {
        style
            .entries
            .par_iter()
            .enumerate()
            .map(|(i, entry)| {
                let img = entry.load()?;
                let prepared = prepare_style(&img, target)?;
                let name = format!("s{i:04}_{}.pgm", entry.stem());
                save_pnm(&prepared, style_out.join(name))?;
                Ok(())
            })
            .collect()
    });

    let mut failures = 0;
    for (i, r) in content_results.iter().chain(&style_results).enumerate() {
        if let Err(e) = r {
            log::warn!("prepare failure on sample {i}: {e:#}");
            failures += 1;
        }
    }
    println!(
        "prepared {} content + {} style images ({failures} failures)",
        content.count(),
        style.count()
    );
    Ok(if failures == 0 {
        CmdStatus::Ok
    } else {
        CmdStatus::Partial { failures }
    })
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

fn load_prepared(dir: &Path) -> anyhow::Result<(DatasetManifest, Vec<Image>)> {
    let manifest = build_manifest(dir, DatasetRole::Content)?;
    let images = manifest
        .entries
        .iter()
        .map(|e| Ok(e.load()?))
        .collect::<anyhow::Result<Vec<_>>>()?;
    Ok((manifest, images))
}

fn save_checkpoint_atomic(model: &StyleTransferModel, path: &Path) -> anyhow::Result<()> {
    let tmp = path.with_extension("ckpt.tmp");
    save_checkpoint(model, &tmp)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

pub fn cmd_train(cfg: &PipelineConfig, flags: &RunFlags) -> anyhow::Result<CmdStatus> {
    let cfg = apply_seed(cfg, flags);
    let content_dir = cfg.output_dir.join("prepared/content");
    let style_dir = cfg.output_dir.join("prepared/style");
    cfg.require_dir("prepared content", &content_dir)?;
    cfg.require_dir("prepared style", &style_dir)?;
    let (_, content) = load_prepared(&content_dir)?;
    let (_, style) = load_prepared(&style_dir)?;

    let model = StyleTransferModel::init(cfg.model, cfg.seed)?;
    println!(
        "training {} parameters for {} iterations (seed {})",
        model.param_count(),
        cfg.iterations,
        cfg.seed
    );
    let hyper = TrainHyper {
        lr: cfg.lr,
        iterations: cfg.iterations,
        weights: cfg.weights,
    };
    let mut trainer = Trainer::new(model, &content, &style, hyper, cfg.seed)?;
    let ckpt_path = cfg.output_dir.join("model.ckpt");
    for i in 1..=cfg.iterations {
        let loss = trainer.step()?;
        if i % cfg.checkpoint_every == 0 {
            save_checkpoint_atomic(trainer.model(), &ckpt_path)?;
            log::info!("iteration {i}: total loss {:.6}, checkpoint written", loss.total);
        }
    }
    save_checkpoint_atomic(trainer.model(), &ckpt_path)?;

    let run = trainer.into_run();
    let mut csv = String::from("iter,total,content,style,id1,id2\n");
    for (i, l) in run.history.iter().enumerate() {
        csv.push_str(&format!(
            "{},{},{},{},{},{}\n",
            i + 1,
            l.total,
            l.content,
            l.style,
            l.identity_pixel,
            l.identity_feature
        ));
    }
    std::fs::write(cfg.output_dir.join("loss_history.csv"), csv)?;
    println!(
        "final loss {:.6}; checkpoint at {}",
        run.history.last().map(|l| l.total).unwrap_or(f64::NAN),
        ckpt_path.display()
    );
    Ok(CmdStatus::Ok)
}

// ---------------------------------------------------------------------------
// transfer
// ---------------------------------------------------------------------------

fn file_stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "image".into())
}

pub fn cmd_transfer(cfg: &PipelineConfig, flags: &RunFlags) -> anyhow::Result<CmdStatus> {
    let cfg = apply_seed(cfg, flags);
    let ckpt_path = cfg.output_dir.join("model.ckpt");
    if !ckpt_path.is_file() {
        bail!(
            "checkpoint {} not found; run the train subcommand first",
            ckpt_path.display()
        );
    }
    let model = load_checkpoint(&ckpt_path)?;
    let content_dir = cfg.output_dir.join("prepared/content");
    let style_dir = cfg.output_dir.join("prepared/style");
    cfg.require_dir("prepared content", &content_dir)?;
    cfg.require_dir("prepared style", &style_dir)?;
    let content = build_manifest(&content_dir, DatasetRole::Content)?;
    let style = build_manifest(&style_dir, DatasetRole::Style)?;
    if style.is_empty() {
        bail!("no prepared style images in {}", style_dir.display());
    }
    let out_dir = cfg.output_dir.join("generated");
    std::fs::create_dir_all(&out_dir)?;

    enum Outcome {
        Generated,
        Skipped,
        Failed(anyhow::Error),
    }

    let pool = pool(flags.jobs)?;
    let outcomes: Vec<Outcome> = pool.install(|| {
        content
            .entries
            .par_iter()
            .enumerate()
            .map(|(i, entry)| {
                let si = match cfg.style_policy {
                    StylePolicy::RoundRobin => i % style.count(),
                    StylePolicy::Fixed(k) => k % style.count(),
                };
                let sentry = &style.entries[si];
                let name = format!("{}__{}.pgm", file_stem(&entry.path), file_stem(&sentry.path));
                let out_path = out_dir.join(&name);
                if out_path.exists() && !flags.force {
                    return Outcome::Skipped;
                }
                let work = || -> anyhow::Result<()> {
                    let c = entry.load()?;
                    let s = sentry.load()?;
                    let mut generated = model.transfer(&c, &s)?;
                    if cfg.noise_intensity > 0.0 {
                        generated = add_speckle_noise(
                            &generated,
                            cfg.noise_intensity,
                            cfg.seed.wrapping_add(i as u64),
                        );
                    }
                    save_pnm(&generated, &out_path)?;
                    Ok(())
                };
                match work() {
                    Ok(()) => Outcome::Generated,
                    Err(e) => Outcome::Failed(e),
                }
            })
            .collect()
    });

    let mut generated = 0;
    let mut skipped = 0;
    let mut failures = 0;
    for (i, o) in outcomes.iter().enumerate() {
        match o {
            Outcome::Generated => generated += 1,
            Outcome::Skipped => skipped += 1,
            Outcome::Failed(e) => {
                log::warn!("transfer failed for content sample {i}: {e:#}");
                failures += 1;
            }
        }
    }
    println!("transfer: {generated} generated, {skipped} skipped, {failures} failed");
    Ok(if failures == 0 {
        CmdStatus::Ok
    } else {
        CmdStatus::Partial { failures }
    })
}

// ---------------------------------------------------------------------------
// evaluate
// ---------------------------------------------------------------------------

/// Two-column CSV `path,score` keyed by both the path as written and its
/// file name.
fn load_dbcnn_scores(path: &Path) -> anyhow::Result<BTreeMap<String, f64>> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim() == "path,score" => {}
        other => bail!(
            "DBCNN CSV {}: expected header 'path,score', got {:?}",
            path.display(),
            other
        ),
    }
    let mut map = BTreeMap::new();
    for (i, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let Some((p, s)) = line.split_once(',') else {
            bail!("DBCNN CSV line {}: malformed '{line}'", i + 2);
        };
        let score: f64 = s
            .trim()
            .parse()
            .with_context(|| format!("DBCNN CSV line {}: bad score '{s}'", i + 2))?;
        map.insert(p.trim().to_string(), score);
        if let Some(name) = Path::new(p.trim()).file_name() {
            map.insert(name.to_string_lossy().into_owned(), score);
        }
    }
    Ok(map)
}

struct PairSpec {
    pseudo: PathBuf,
    real: PathBuf,
    id: String,
}

fn load_pairs(path: &Path) -> anyhow::Result<Vec<PairSpec>> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim() == "pseudo_path,real_path,pair_id" => {}
        other => bail!(
            "pairs CSV {}: expected header 'pseudo_path,real_path,pair_id', got {:?}",
            path.display(),
            other
        ),
    }
    let mut out = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 3 {
            bail!("pairs CSV line {}: expected 3 fields, got {}", i + 2, fields.len());
        }
        out.push(PairSpec {
            pseudo: PathBuf::from(fields[0]),
            real: PathBuf::from(fields[1]),
            id: fields[2].to_string(),
        });
    }
    Ok(out)
}

pub fn cmd_evaluate(cfg: &PipelineConfig, flags: &RunFlags) -> anyhow::Result<CmdStatus> {
    let cfg = apply_seed(cfg, flags);
    let generated_dir = cfg.output_dir.join("generated");
    cfg.require_dir("generated images", &generated_dir)?;
    let generated = build_manifest(&generated_dir, DatasetRole::Content)?;
    if generated.is_empty() {
        bail!("no generated images in {}", generated_dir.display());
    }
    let pristine_dir = cfg
        .pristine_dir
        .clone()
        .unwrap_or_else(|| cfg.output_dir.join("prepared/style"));
    cfg.require_dir("pristine corpus", &pristine_dir)?;
    let (_, pristine) = load_prepared(&pristine_dir)?;

    let eval_dir = cfg.output_dir.join("eval");
    std::fs::create_dir_all(&eval_dir)?;

    log::info!("fitting NIQE model on {} pristine images", pristine.len());
    let niqe_model = fit_niqe_model(&pristine, cfg.niqe_patch, cfg.niqe_quantile)?;
    niqe_model.save(eval_dir.join("niqe.model"))?;

    log::info!("building synthetic distortion corpus for the quality regressor");
    let corpus = build_regressor_corpus(&pristine, cfg.seed)?;
    let regressor = train_quality_regressor(&corpus, cfg.ridge_lambda)?;
    regressor.save(eval_dir.join("brisque.model"))?;

    let dbcnn = match &cfg.dbcnn_csv {
        Some(p) => {
            cfg.require_file("dbcnn_csv", p)?;
            Some(load_dbcnn_scores(p)?)
        }
        None => None,
    };

    let pool = pool(flags.jobs)?;
    let quality: Vec<anyhow::Result<QualityRow>> = pool.install(|| {
        generated
            .entries
            .par_iter()
            .map(|entry| {
                let img = entry.load()?;
                let name = entry
                    .path
                    .file_name()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_default();
                let niqe = niqe_score(&img, &niqe_model)?;
                let brisque = brisque_score(&img, &regressor)?;
                let db = dbcnn.as_ref().and_then(|m| {
                    m.get(&name)
                        .or_else(|| m.get(&entry.path.display().to_string()))
                        .copied()
                });
                if dbcnn.is_some() && db.is_none() {
                    log::warn!("no DBCNN score for {name}");
                }
                Ok(QualityRow {
                    image: name,
                    dbcnn: db,
                    niqe,
                    brisque,
                })
            })
            .collect()
    });
    let mut failures = 0;
    let mut quality_rows = Vec::new();
    for (i, r) in quality.into_iter().enumerate() {
        match r {
            Ok(row) => quality_rows.push(row),
            Err(e) => {
                log::warn!("quality scoring failed for image {i}: {e:#}");
                failures += 1;
            }
        }
    }

    let mut similarity_rows = Vec::new();
    if let Some(pairs_path) = &cfg.pairs_csv {
        cfg.require_file("pairs_csv", pairs_path)?;
        let params = SimilarityParams {
            cosine_side: cfg.cosine_side,
        };
        for spec in load_pairs(pairs_path)? {
            let work = || -> anyhow::Result<SimilarityReport> {
                let pseudo = load_pnm(&spec.pseudo)
                    .with_context(|| format!("pseudo image {}", spec.pseudo.display()))?;
                let real = load_pnm(&spec.real)
                    .with_context(|| format!("real image {}", spec.real.display()))?;
                Ok(evaluate_pair(&spec.id, &pseudo, &real, params))
            };
            match work() {
                Ok(rep) => similarity_rows.push(rep),
                Err(e) => {
                    log::warn!("similarity failed for pair {}: {e:#}", spec.id);
                    failures += 1;
                }
            }
        }
    }

    let bundle = ReportBundle {
        quality: quality_rows,
        similarity: similarity_rows,
        seed: cfg.seed,
        config_hash: cfg.run_id(),
        has_dbcnn: dbcnn.is_some(),
    };
    bundle.write_eval_dir(&eval_dir)?;
    println!(
        "evaluated {} images, {} pairs ({failures} failures)",
        bundle.quality.len(),
        bundle.similarity.len()
    );
    Ok(if failures == 0 {
        CmdStatus::Ok
    } else {
        CmdStatus::Partial { failures }
    })
}

// ---------------------------------------------------------------------------
// report bundle + rendering
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub struct QualityRow {
    pub image: String,
    pub dbcnn: Option<f64>,
    pub niqe: f64,
    pub brisque: f64,
}

/// Everything one evaluation run produced, as written under `eval/`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportBundle {
    pub quality: Vec<QualityRow>,
    pub similarity: Vec<SimilarityReport>,
    pub seed: u64,
    pub config_hash: String,
    pub has_dbcnn: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Markdown,
}

impl ReportBundle {
    fn quality_header(&self) -> &'static str {
        if self.has_dbcnn {
            "image,dbcnn,niqe,brisque"
        } else {
            "image,niqe,brisque"
        }
    }

    /// Full-precision CSVs plus run metadata, consumed by `report`.
    pub fn write_eval_dir(&self, dir: &Path) -> anyhow::Result<()> {
        let mut q = String::from(self.quality_header());
        q.push('\n');
        for row in &self.quality {
            if self.has_dbcnn {
                let db = row.dbcnn.map(|v| v.to_string()).unwrap_or_default();
                q.push_str(&format!("{},{},{},{}\n", row.image, db, row.niqe, row.brisque));
            } else {
                q.push_str(&format!("{},{},{}\n", row.image, row.niqe, row.brisque));
            }
        }
        std::fs::write(dir.join("quality.csv"), q)?;

        let mut s = String::from("pair,cosine,phash,average\n");
        for row in &self.similarity {
            s.push_str(&format!(
                "{},{},{},{}\n",
                row.pair_id, row.cosine, row.phash, row.average
            ));
        }
        std::fs::write(dir.join("similarity.csv"), s)?;

        std::fs::write(
            dir.join("run.txt"),
            format!("seed = {}\nconfig_hash = {}\n", self.seed, self.config_hash),
        )?;
        Ok(())
    }

    pub fn read_eval_dir(dir: &Path) -> anyhow::Result<Self> {
        let qtext = std::fs::read_to_string(dir.join("quality.csv"))?;
        let mut qlines = qtext.lines();
        let header = qlines.next().unwrap_or_default().trim();
        let has_dbcnn = match header {
            "image,dbcnn,niqe,brisque" => true,
            "image,niqe,brisque" => false,
            other => bail!("unexpected quality.csv header '{other}'"),
        };
        let mut quality = Vec::new();
        for (i, line) in qlines.enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split(',').collect();
            let expect = if has_dbcnn { 4 } else { 3 };
            if f.len() != expect {
                bail!("quality.csv line {}: expected {expect} fields", i + 2);
            }
            let parse = |s: &str, what: &str| -> anyhow::Result<f64> {
                s.parse()
                    .with_context(|| format!("quality.csv line {}: bad {what} '{s}'", i + 2))
            };
            quality.push(if has_dbcnn {
                QualityRow {
                    image: f[0].to_string(),
                    dbcnn: if f[1].is_empty() {
                        None
                    } else {
                        Some(parse(f[1], "dbcnn")?)
                    },
                    niqe: parse(f[2], "niqe")?,
                    brisque: parse(f[3], "brisque")?,
                }
            } else {
                QualityRow {
                    image: f[0].to_string(),
                    dbcnn: None,
                    niqe: parse(f[1], "niqe")?,
                    brisque: parse(f[2], "brisque")?,
                }
            });
        }

        let stext = std::fs::read_to_string(dir.join("similarity.csv"))?;
        let mut slines = stext.lines();
        if slines.next().unwrap_or_default().trim() != "pair,cosine,phash,average" {
            bail!("unexpected similarity.csv header");
        }
        let mut similarity = Vec::new();
        for (i, line) in slines.enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 4 {
                bail!("similarity.csv line {}: expected 4 fields", i + 2);
            }
            let parse = |s: &str| -> anyhow::Result<f64> {
                s.parse()
                    .with_context(|| format!("similarity.csv line {}: bad value '{s}'", i + 2))
            };
            similarity.push(SimilarityReport {
                pair_id: f[0].to_string(),
                cosine: parse(f[1])?,
                phash: parse(f[2])?,
                average: parse(f[3])?,
            });
        }

        let mut seed = 0;
        let mut config_hash = String::new();
        if let Ok(meta) = std::fs::read_to_string(dir.join("run.txt")) {
            for line in meta.lines() {
                if let Some(v) = line.strip_prefix("seed = ") {
                    seed = v.trim().parse().unwrap_or(0);
                }
                if let Some(v) = line.strip_prefix("config_hash = ") {
                    config_hash = v.trim().to_string();
                }
            }
        }

        Ok(ReportBundle {
            quality,
            similarity,
            seed,
            config_hash,
            has_dbcnn,
        })
    }
}

/// Render the bundle as table files; returns `(file name, contents)` pairs.
/// Values use 4-decimal half-up formatting; the markdown layout mirrors the
/// published table structure with "(lower - better)" annotations.
pub fn emit_report(bundle: &ReportBundle, format: ReportFormat) -> Vec<(String, String)> {
    match format {
        ReportFormat::Csv => {
            let mut q = String::from(bundle.quality_header());
            q.push('\n');
            for row in &bundle.quality {
                if bundle.has_dbcnn {
                    let db = row.dbcnn.map(format_4dp).unwrap_or_default();
                    q.push_str(&format!(
                        "{},{},{},{}\n",
                        row.image,
                        db,
                        format_4dp(row.niqe),
                        format_4dp(row.brisque)
                    ));
                } else {
                    q.push_str(&format!(
                        "{},{},{}\n",
                        row.image,
                        format_4dp(row.niqe),
                        format_4dp(row.brisque)
                    ));
                }
            }
            let mut s = String::from("pair,cosine,phash,average\n");
            for row in &bundle.similarity {
                s.push_str(&row.to_csv_row());
                s.push('\n');
            }
            vec![("quality.csv".into(), q), ("similarity.csv".into(), s)]
        }
        ReportFormat::Markdown => {
            let mut q = String::from("# Quality assessment results\n\n");
            if bundle.has_dbcnn {
                q.push_str("| Image | DBCNN (higher - better) | NIQE (lower - better) | BRISQUE (lower - better) |\n");
                q.push_str("|---|---|---|---|\n");
                for row in &bundle.quality {
                    let db = row.dbcnn.map(format_4dp).unwrap_or_else(|| "-".into());
                    q.push_str(&format!(
                        "| {} | {} | {} | {} |\n",
                        row.image,
                        db,
                        format_4dp(row.niqe),
                        format_4dp(row.brisque)
                    ));
                }
            } else {
                q.push_str("| Image | NIQE (lower - better) | BRISQUE (lower - better) |\n");
                q.push_str("|---|---|---|\n");
                for row in &bundle.quality {
                    q.push_str(&format!(
                        "| {} | {} | {} |\n",
                        row.image,
                        format_4dp(row.niqe),
                        format_4dp(row.brisque)
                    ));
                }
            }
            let mut s = String::from("# Similarity evaluation results\n\n");
            s.push_str("| Pair | Cosine similarity | Perceptual Hash | Average similarity |\n");
            s.push_str("|---|---|---|---|\n");
            for row in &bundle.similarity {
                s.push_str(&format!(
                    "| {} | {} | {} | {} |\n",
                    row.pair_id,
                    format_4dp(row.cosine),
                    format_4dp(row.phash),
                    format_4dp(row.average)
                ));
            }
            vec![("quality.md".into(), q), ("similarity.md".into(), s)]
        }
    }
}

pub fn cmd_report(cfg: &PipelineConfig, flags: &RunFlags) -> anyhow::Result<CmdStatus> {
    let cfg = apply_seed(cfg, flags);
    let eval_dir = cfg.output_dir.join("eval");
    cfg.require_dir("evaluation results", &eval_dir)?;
    let bundle = ReportBundle::read_eval_dir(&eval_dir)?;

    let report_dir = cfg.output_dir.join(format!("report-{}", cfg.run_id()));
    if report_dir.exists() {
        if !flags.force {
            bail!(
                "report directory {} already exists (reports are append-free; use --force to replace)",
                report_dir.display()
            );
        }
        std::fs::remove_dir_all(&report_dir)?;
    }
    std::fs::create_dir_all(&report_dir)?;
    for format in [ReportFormat::Csv, ReportFormat::Markdown] {
        for (name, contents) in emit_report(&bundle, format) {
            std::fs::write(report_dir.join(name), contents)?;
        }
    }
    std::fs::write(
        report_dir.join("run.txt"),
        format!("seed = {}\nconfig_hash = {}\n", bundle.seed, bundle.config_hash),
    )?;
    println!("report written to {}", report_dir.display());
    Ok(CmdStatus::Ok)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fixture_bundle() -> ReportBundle {
        ReportBundle {
            quality: vec![QualityRow {
                image: "ours.pgm".into(),
                dbcnn: Some(25.0076),
                niqe: 7.1349,
                brisque: 62.7893,
            }],
            similarity: vec![
                SimilarityReport {
                    pair_id: "crucian_carp".into(),
                    cosine: 0.8290,
                    phash: 0.7031,
                    average: (0.8290f64 + 0.7031) / 2.0,
                },
                SimilarityReport {
                    pair_id: "carp".into(),
                    cosine: 0.6962,
                    phash: 0.8282,
                    average: (0.6962f64 + 0.8282) / 2.0,
                },
                SimilarityReport {
                    pair_id: "barbel".into(),
                    cosine: 0.8388,
                    phash: 0.7187,
                    average: (0.8388f64 + 0.7187) / 2.0,
                },
            ],
            seed: 1,
            config_hash: "deadbeef".into(),
            has_dbcnn: true,
        }
    }

    #[test]
    fn markdown_shows_reported_averages_and_annotations() {
        let files = emit_report(&fixture_bundle(), ReportFormat::Markdown);
        let quality = &files[0].1;
        assert!(quality.contains("NIQE (lower - better)"));
        assert!(quality.contains("BRISQUE (lower - better)"));
        assert!(quality.contains("DBCNN (higher - better)"));
        assert!(quality.contains("| ours.pgm | 25.0076 | 7.1349 | 62.7893 |"));
        let sim = &files[1].1;
        assert!(sim.contains("| crucian_carp | 0.8290 | 0.7031 | 0.7661 |"));
        assert!(sim.contains("| carp | 0.6962 | 0.8282 | 0.7622 |"));
        assert!(sim.contains("| barbel | 0.8388 | 0.7187 | 0.7788 |"));
    }

    #[test]
    fn csv_report_uses_4dp() {
        let files = emit_report(&fixture_bundle(), ReportFormat::Csv);
        assert!(files[0].1.contains("ours.pgm,25.0076,7.1349,62.7893"));
        assert!(files[1].1.contains("crucian_carp,0.8290,0.7031,0.7661"));
    }

    #[test]
    fn empty_bundle_renders_headers_only() {
        let bundle = ReportBundle {
            quality: vec![],
            similarity: vec![],
            seed: 0,
            config_hash: String::new(),
            has_dbcnn: false,
        };
        let files = emit_report(&bundle, ReportFormat::Csv);
        assert_eq!(files[0].1, "image,niqe,brisque\n");
        assert_eq!(files[1].1, "pair,cosine,phash,average\n");
    }

    #[test]
    fn dbcnn_column_omitted_when_absent() {
        let mut bundle = fixture_bundle();
        bundle.has_dbcnn = false;
        bundle.quality[0].dbcnn = None;
        let files = emit_report(&bundle, ReportFormat::Csv);
        assert!(files[0].1.starts_with("image,niqe,brisque\n"));
        assert!(!files[0].1.contains("dbcnn"));
    }

    #[test]
    fn eval_dir_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let bundle = fixture_bundle();
        bundle.write_eval_dir(dir.path()).unwrap();
        let back = ReportBundle::read_eval_dir(dir.path()).unwrap();
        assert_eq!(back, bundle);
    }
}

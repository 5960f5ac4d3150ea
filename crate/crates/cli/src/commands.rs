use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use rayon::prelude::*;
use serde_json::json;
use zrfl_core::evaluation::{
    abx_list_to_text, read_abx_list, read_word_list, word_list_to_text, SameDiffOptions,
};
use zrfl_core::features::{add_deltas, apply_cmvn, compute_mfcc, read_archive, read_wav_mono, write_archive};
use zrfl_core::models::{
    extract_all, gradient_check_model, load_checkpoint, save_checkpoint, train as train_model, Architecture,
    EarlyStopping, EpochRecord, TrainConfig, Validation,
};
use zrfl_core::pairing::{
    build_frame_pairs, generate_synthetic_corpus, load_pair_list, pair_list_to_text, read_dataset, sample_quadruplets,
    sample_triplets, unique_segments, write_dataset, TrainingSet,
};
use zrfl_core::{abx_error, same_different_ap, EvalReport, FeatureSet, ModelKind, SpeakerMap};

use crate::args::{
    EvalArgs, ExtractArgs, FeaturizeArgs, GradcheckArgs, PairsArgs, SynthArgs, Task, TrainArgs, UsageError,
};
use crate::manifest::RunConfig;
use crate::NumericFailure;

fn wav_paths(source: &Path) -> Result<Vec<PathBuf>> {
    let mut paths = if source.is_dir() {
        let mut found = Vec::new();
        for entry in std::fs::read_dir(source).with_context(|| format!("listing {}", source.display()))? {
            let path = entry?.path();
            if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("wav")) {
                found.push(path);
            }
        }
        found
    } else {
        let text = std::fs::read_to_string(source).with_context(|| format!("reading {}", source.display()))?;
        let base = source.parent().unwrap_or(Path::new(""));
        text.lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(|l| base.join(l))
            .collect()
    };
    paths.sort();
    if paths.is_empty() {
        bail!("no WAV files in {}", source.display());
    }
    Ok(paths)
}

fn utterance_id(path: &Path) -> Result<String> {
    path.file_stem()
        .and_then(|s| s.to_str())
        .map(str::to_string)
        .with_context(|| format!("no usable file name in {}", path.display()))
}

pub fn featurize(args: &FeaturizeArgs) -> Result<()> {
    let wavs = wav_paths(&args.wavs)?;
    let mut inputs: Vec<&Path> = wavs.iter().map(PathBuf::as_path).collect();
    inputs.push(&args.speakers);
    let mut run = RunConfig::new("featurize", args, &inputs)?;
    let speakers = SpeakerMap::read(&args.speakers)?;
    let mfccs = wavs
        .par_iter()
        .map(|path| -> Result<_> {
            let (samples, rate) = read_wav_mono(path)?;
            let id = utterance_id(path)?;
            compute_mfcc(&id, &samples, rate).with_context(|| format!("utterance '{id}'"))
        })
        .collect::<Result<Vec<_>>>()?;
    let normalized = apply_cmvn(&mfccs, &speakers, args.cmvn.into())?;
    let features = normalized.iter().map(add_deltas).collect::<zrfl_core::Result<Vec<_>>>()?;
    write_archive(&features, &args.out)?;
    let frames: usize = features.iter().map(|f| f.num_frames()).sum();
    println!("{} utterances, {frames} frames, dim {}", features.len(), features.first().map_or(0, |f| f.dim()));
    run.outcome = Some(json!({ "utterances": features.len(), "frames": frames }));
    run.write_next_to(&args.out)?;
    Ok(())
}

pub fn pairs(args: &PairsArgs) -> Result<()> {
    let mut run = RunConfig::new("pairs", args, &[&args.features, &args.pairs, &args.speakers])?;
    let features = FeatureSet::new(read_archive(&args.features)?)?;
    let speakers = SpeakerMap::read(&args.speakers)?;
    let discovered = load_pair_list(&args.pairs, &features, &speakers)?;
    let frame_pairs = build_frame_pairs(&discovered, &features, args.metric.into())?;
    let mut summary = json!({ "discovered_pairs": discovered.len(), "frame_pairs": frame_pairs.len() });
    println!("{} discovered pairs, {} frame pairs", discovered.len(), frame_pairs.len());
    let kind: ModelKind = args.model.into();
    let set = if kind == ModelKind::Cae {
        TrainingSet::Pairs(frame_pairs)
    } else {
        let segments = unique_segments(&discovered);
        let (triplets, ts) = sample_triplets(&frame_pairs, &segments, &features, args.seed)?;
        println!("triplets: {} emitted, {} dropped", ts.emitted, ts.dropped);
        summary["triplets"] = json!(ts);
        if kind == ModelKind::Triamese {
            TrainingSet::Triplets(triplets)
        } else {
            let (quads, qs) = sample_quadruplets(&triplets, &segments, &features, args.metric.into(), args.seed)?;
            println!("quadruplets: {} emitted, {} dropped", qs.emitted, qs.dropped);
            summary["quadruplets"] = json!(qs);
            TrainingSet::Quadruplets(quads)
        }
    };
    if set.is_empty() {
        eprintln!("warning: no {} survived sampling; the dataset is empty", set.kind());
    }
    write_dataset(&set, &args.out)?;
    run.outcome = Some(summary);
    run.write_next_to(&args.out)?;
    Ok(())
}

fn log_csv(log: &[EpochRecord], with_val: bool) -> String {
    let mut out = String::from(if with_val { "epoch,loss,val_ap\n" } else { "epoch,loss\n" });
    for r in log {
        match (with_val, r.val_ap) {
            (true, Some(ap)) => writeln!(out, "{},{},{}", r.epoch, r.loss, ap),
            _ => writeln!(out, "{},{}", r.epoch, r.loss),
        }
        .expect("writing to a string");
    }
    out
}

pub fn train(args: &TrainArgs) -> Result<()> {
    let kind: ModelKind = args.model.into();
    if args.wide && kind != ModelKind::Triamese {
        return Err(UsageError("--wide applies to the Triamese model only".into()).into());
    }
    let mut inputs: Vec<&Path> = vec![&args.dataset];
    inputs.extend(args.val_words.as_deref());
    inputs.extend(args.features.as_deref());
    let mut run = RunConfig::new("train", args, &inputs)?;

    let mut cfg = TrainConfig::new(kind);
    cfg.epochs = args.epochs;
    cfg.batch_size = args.batch_size;
    cfg.seed = args.seed;
    cfg.margin = args.margin;
    cfg.speaker_conditioning = args.speaker_conditioning;
    cfg.autoencoder_pretrain_epochs = args.pretrain_epochs;
    if let Some(lr) = args.lr {
        cfg.optimizer = cfg.optimizer.with_lr(lr);
    }
    if args.wide {
        cfg.architecture = Architecture::wide_triamese();
    }
    cfg.early_stopping = if args.val_words.is_some() {
        EarlyStopping::ValidationAp { patience: args.patience }
    } else {
        EarlyStopping::FixedEpochs
    };
    cfg.validate().map_err(|e| UsageError(e.to_string()))?;

    let set = read_dataset(&args.dataset)?;
    if set.kind() != cfg.item_kind() {
        bail!(zrfl_core::Error::KindMismatch {
            expected: cfg.item_kind().to_string(),
            got: set.kind().to_string(),
        });
    }
    let val_data = match (&args.val_words, &args.features) {
        (Some(words), Some(features)) => Some((read_word_list(words)?, FeatureSet::new(read_archive(features)?)?)),
        _ => None,
    };
    let validation = val_data.as_ref().map(|(words, features)| Validation {
        words,
        features,
        options: SameDiffOptions::default(),
    });
    let outcome = train_model(&set, &cfg, validation.as_ref())?;
    save_checkpoint(&outcome.checkpoint, &args.out)?;
    let log_path = args.log.clone().unwrap_or_else(|| {
        let mut name = args.out.file_name().map(std::ffi::OsString::from).unwrap_or_default();
        name.push(".log.csv");
        args.out.with_file_name(name)
    });
    std::fs::write(&log_path, log_csv(&outcome.log, validation.is_some()))
        .with_context(|| format!("writing {}", log_path.display()))?;
    for r in &outcome.log {
        match r.val_ap {
            Some(ap) => println!("epoch {}: loss {:.6} val AP {:.4}", r.epoch, r.loss, ap),
            None => println!("epoch {}: loss {:.6}", r.epoch, r.loss),
        }
    }
    if outcome.stopped_early {
        eprintln!(
            "warning: stopped early after {} of {} epochs",
            outcome.log.len(),
            cfg.epochs
        );
    }
    if let Some(best) = outcome.best_epoch {
        println!("kept checkpoint from epoch {best}");
    }
    run.outcome = Some(json!({
        "train_config": cfg,
        "config_digest": format!("{:08x}", cfg.digest()),
        "epochs_run": outcome.log.len(),
        "stopped_early": outcome.stopped_early,
        "best_epoch": outcome.best_epoch,
        "log": log_path,
    }));
    run.write_next_to(&args.out)?;
    Ok(())
}

pub fn extract(args: &ExtractArgs) -> Result<()> {
    let run = RunConfig::new("extract", args, &[&args.checkpoint, &args.features])?;
    let ck = load_checkpoint(&args.checkpoint)?;
    let model = match args.model {
        Some(m) => ck.require_kind(m.into())?,
        None => &ck.model,
    };
    let features = read_archive(&args.features)?;
    let out = extract_all(model, &features)?;
    write_archive(&out, &args.out)?;
    println!("{} utterances, dim {}", out.len(), model.embedding_dim());
    run.write_next_to(&args.out)?;
    Ok(())
}

pub fn eval(args: &EvalArgs) -> Result<()> {
    let run = RunConfig::new("eval", args, &[&args.features, &args.list])?;
    let features = FeatureSet::new(read_archive(&args.features)?)?;
    let report = match args.task {
        Task::Samediff => {
            let words = read_word_list(&args.list)?;
            let options = SameDiffOptions {
                metric: args.metric.into(),
                cross_speaker_only: args.cross_speaker_only,
                min_frames: args.min_frames,
            };
            let sd = same_different_ap(&words, &features, &options)?;
            if let Some(path) = &args.pr_csv {
                sd.pr_curve.write_csv(path)?;
            }
            EvalReport {
                same_different: Some(sd),
                abx: None,
            }
        }
        Task::Abx => {
            if args.pr_csv.is_some() {
                return Err(UsageError("--pr-csv applies to the samediff task only".into()).into());
            }
            let items = read_abx_list(&args.list)?;
            EvalReport {
                same_different: None,
                abx: Some(abx_error(&items, &features, args.metric.into())?),
            }
        }
    };
    let text = report.to_text();
    print!("{text}");
    if let Some(out) = &args.out {
        std::fs::write(out, &text).with_context(|| format!("writing {}", out.display()))?;
        run.write_next_to(out)?;
    }
    Ok(())
}

pub fn synth(args: &SynthArgs) -> Result<()> {
    let config = args.config();
    let run = RunConfig::new("synth", args, &[])?;
    let corpus = generate_synthetic_corpus(&config)?;
    if config.n_speakers == 1 {
        eprintln!(
            "warning: single speaker; usable for the CAE, but triplet negatives all come from that speaker \
             and the ABX list has no cross-speaker X"
        );
    }
    let features = if args.cmvn {
        apply_cmvn(&corpus.features, &corpus.speakers, Default::default())?
    } else {
        corpus.features.clone()
    };
    let dir = &args.out_dir;
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    write_archive(&features, dir.join("features.zrfa"))?;
    corpus.speakers.write(dir.join("speakers.txt"))?;
    let write = |name: &str, text: String| {
        let path = dir.join(name);
        std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))
    };
    write("pairs.txt", pair_list_to_text(&corpus.pairs))?;
    write("words.txt", word_list_to_text(&corpus.eval_words))?;
    write("abx.txt", abx_list_to_text(&corpus.abx_items))?;
    write("train_words.txt", word_list_to_text(&corpus.words))?;
    println!(
        "{} utterances, {} pairs, {} evaluation words, {} ABX items",
        features.len(),
        corpus.pairs.len(),
        corpus.eval_words.len(),
        corpus.abx_items.len()
    );
    run.write_next_to(&dir.join("corpus"))?;
    Ok(())
}

pub fn gradcheck(args: &GradcheckArgs) -> Result<()> {
    RunConfig::new("gradcheck", args, &[])?;
    let kinds: Vec<ModelKind> = match args.model {
        Some(m) => vec![m.into()],
        None => ModelKind::ALL.to_vec(),
    };
    let mut failed = Vec::new();
    for kind in kinds {
        let report = gradient_check_model(kind, args.seed, args.tolerance)?;
        println!(
            "{kind}: max relative error {:.3e} ({} parameters checked, {} skipped at kinks)",
            report.max_rel_error, report.checked, report.skipped_kinks
        );
        if !report.passed() {
            failed.push(kind.name());
        }
    }
    if !failed.is_empty() {
        return Err(NumericFailure(format!(
            "gradient check above {} for {}",
            args.tolerance,
            failed.join(", ")
        ))
        .into());
    }
    Ok(())
}

use std::fs;
use std::path::{Path, PathBuf};

use ctxtag::charlm::{continue_pretrain, save_checkpoint, train_lm_logged, CharLMCheckpoint, Direction, LmTrainLog};
use ctxtag::corpus::{load_char_stream, merge_corpora, parse_conll, write_conll, SentenceRef, Split, TaggedCorpus};
use ctxtag::embeddings::{format_entry, EmbedderStack, PoolOp};
use ctxtag::eval::{evaluate, render_study, StudyReport, StudyRow};
use ctxtag::study::{run_study, LabeledStack, StudyKind, StudySpec};
use ctxtag::tagger::{load_tagger, predict_split, save_tagger, train_tagger_observed, TaggerModel, TrainEvent};
use ctxtag::{Real, Scalar};
use serde_json::{json, Value};

use crate::config::{list, RunConfig};
use crate::stack::{check_stack, load_lm_pair, load_stack, lm_paths, parse_stack, MemberDecl};
use crate::CliError;

pub const MANIFEST: &str = "manifest.json";
pub const MODEL_FILE: &str = "model.ctxtag";

/// What a command produced, for the manifest.
#[derive(Default)]
struct Record {
    corpora: Vec<Value>,
    language_models: Vec<Value>,
    outputs: Vec<String>,
}

impl Record {
    fn corpus(&mut self, c: &TaggedCorpus) {
        self.corpora.push(json!({
            "name": c.name,
            "train": c.train.len(),
            "dev": c.dev.len(),
            "test": c.test.len(),
            "entity_types": c.tag_set,
        }));
    }

    fn lm(&mut self, m: &CharLMCheckpoint<Real>) {
        self.language_models.push(json!({
            "direction": m.direction,
            "vocab_size": m.vocab_size(),
            "embed_dim": m.embed_dim(),
            "hidden_dim": m.hidden_dim(),
            "lineage": m.lineage,
        }));
    }

    fn write(&mut self, out_dir: &Path, name: &str, bytes: impl AsRef<[u8]>) -> Result<PathBuf, CliError> {
        let p = out_dir.join(name);
        if let Some(parent) = p.parent() {
            fs::create_dir_all(parent).map_err(|e| CliError::Output(parent.to_path_buf(), e))?;
        }
        fs::write(&p, bytes).map_err(|e| CliError::Output(p.clone(), e))?;
        self.outputs.push(name.to_string());
        Ok(p)
    }

    fn finish(mut self, command: &str, cfg: &RunConfig, out_dir: &Path) -> Result<(), CliError> {
        self.outputs.push(MANIFEST.into());
        let manifest = json!({
            "command": command,
            "version": env!("CARGO_PKG_VERSION"),
            "precision": Real::PRECISION.to_string(),
            "seed": cfg.seed()?,
            "config": cfg.snapshot(),
            "corpora": self.corpora,
            "language_models": self.language_models,
            "outputs": self.outputs,
        });
        let text = serde_json::to_string_pretty(&manifest).expect("manifest serialises") + "\n";
        let p = out_dir.join(MANIFEST);
        fs::write(&p, text).map_err(|e| CliError::Output(p, e))
    }
}

fn create_out_dir(cfg: &RunConfig) -> Result<PathBuf, CliError> {
    let dir = cfg.out_dir()?;
    fs::create_dir_all(&dir).map_err(|e| CliError::Output(dir.clone(), e))?;
    Ok(dir)
}

fn to_json<T: serde::Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("serialisable") + "\n"
}

/// Raw text files named by `raw_text`, all checked for existence.
fn raw_text_paths(cfg: &RunConfig) -> Result<Vec<PathBuf>, CliError> {
    let paths: Vec<PathBuf> = list(&cfg.required("raw_text")?).iter().map(|p| cfg.resolve("raw_text", p)).collect();
    for p in &paths {
        crate::config::must_exist(p, "raw_text")?;
    }
    Ok(paths)
}

fn lm_log_line(name: &str, log: &LmTrainLog) -> String {
    let last = log.recent_loss(50).map_or("n/a".into(), |l| format!("{l:.4}"));
    let held = log.evaluations.last().map_or(String::new(), |e| format!(", held-out {:.4} at step {}", e.loss, e.step));
    format!("{name}: {} steps, recent loss {last}{held}", log.losses.len())
}

pub fn pretrain(cfg: &RunConfig) -> Result<(), CliError> {
    let paths = raw_text_paths(cfg)?;
    let lm_cfg = cfg.lm_config()?;
    let name = cfg.required("lm.name")?;
    cfg.out_dir()?;
    let stream = load_char_stream(&paths)?;

    let out = create_out_dir(cfg)?;
    let mut rec = Record::default();
    let mut logs = serde_json::Map::new();
    for (dir, path) in [Direction::Forward, Direction::Backward].into_iter().zip(lm_paths(Path::new(&name))) {
        let (m, log) = train_lm_logged::<Real>(&stream, dir, &lm_cfg)?;
        println!("{}", lm_log_line(&dir.to_string(), &log));
        let file = path.display().to_string();
        save_checkpoint(&m, &out.join(&file))?;
        rec.outputs.push(file);
        rec.lm(&m);
        logs.insert(dir.to_string(), serde_json::to_value(&log).expect("log serialises"));
    }
    rec.write(&out, "pretrain_log.json", to_json(&logs))?;
    rec.finish("pretrain", cfg, &out)
}

pub fn continue_(cfg: &RunConfig) -> Result<(), CliError> {
    let base = cfg.resolve("lm.base", &cfg.required("lm.base")?);
    for p in lm_paths(&base) {
        crate::config::must_exist(&p, "lm.base")?;
    }
    let paths = raw_text_paths(cfg)?;
    let name = cfg.required("lm.name")?;
    cfg.out_dir()?;
    let (fwd, bwd) = load_lm_pair(&base)?;
    // Dimensions default to the base models'; explicit values must agree.
    let mut lm_cfg = cfg.lm_config()?;
    for (key, have, want) in [
        ("lm.hidden_dim", &mut lm_cfg.hidden_dim, fwd.hidden_dim()),
        ("lm.embed_dim", &mut lm_cfg.embed_dim, fwd.embed_dim()),
    ] {
        if cfg.explicit(key) && *have != want {
            return Err(CliError::Config(format!("{key} = {have} but the base models have {want}")));
        }
        *have = want;
    }
    let stream = load_char_stream(&paths)?;

    let out = create_out_dir(cfg)?;
    let mut rec = Record::default();
    let mut logs = serde_json::Map::new();
    for (base_model, path) in [fwd, bwd].iter().zip(lm_paths(Path::new(&name))) {
        let (m, log) = continue_pretrain(base_model, &stream, &lm_cfg)?;
        let dir = m.direction.to_string();
        println!("{}", lm_log_line(&dir, &log));
        let file = path.display().to_string();
        save_checkpoint(&m, &out.join(&file))?;
        rec.outputs.push(file);
        rec.lm(&m);
        logs.insert(dir, serde_json::to_value(&log).expect("log serialises"));
    }
    rec.write(&out, "pretrain_log.json", to_json(&logs))?;
    rec.finish("continue", cfg, &out)
}

/// Paths of a corpus's splits under `prefix` (`corpus` or `corpus2`).
struct CorpusPlan {
    name: String,
    splits: Vec<(Split, PathBuf)>,
}

fn plan_corpus(cfg: &RunConfig, prefix: &str, required: &[Split]) -> Result<CorpusPlan, CliError> {
    let mut splits = Vec::new();
    for split in Split::ALL {
        let key = format!("{prefix}.{split}");
        if required.contains(&split) {
            splits.push((split, cfg.existing_path(&key)?));
        } else if let Some(p) = cfg.optional_existing_path(&key)? {
            splits.push((split, p));
        }
    }
    Ok(CorpusPlan { name: cfg.required(&format!("{prefix}.name"))?, splits })
}

fn load_corpus(cfg: &RunConfig, plan: &CorpusPlan) -> Result<TaggedCorpus, CliError> {
    let cols = cfg.columns()?;
    let mut parts: [Vec<_>; 3] = Default::default();
    for (split, path) in &plan.splits {
        let text = fs::read_to_string(path).map_err(|e| CliError::Input(path.clone(), e))?;
        parts[*split as usize] = parse_conll(&text, cols).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    }
    let [train, dev, test] = parts;
    Ok(TaggedCorpus::new(plan.name.clone(), train, dev, test))
}

fn pool(cfg: &RunConfig) -> Result<PoolOp, CliError> {
    Ok(cfg.required("pool")?.parse::<PoolOp>()?)
}

fn plan_stack(cfg: &RunConfig) -> Result<Vec<MemberDecl>, CliError> {
    let members = parse_stack(&cfg.required("stack")?, |p| cfg.resolve("stack", p))?;
    check_stack(&members, "stack")?;
    Ok(members)
}

fn loaded_stack(members: &[MemberDecl], cfg: &RunConfig, rec: &mut Record) -> Result<EmbedderStack<Real>, CliError> {
    let (stack, lms) = load_stack(members, pool(cfg)?)?;
    lms.iter().for_each(|m| rec.lm(m));
    Ok(stack)
}

pub fn train(cfg: &RunConfig) -> Result<(), CliError> {
    let plan = plan_corpus(cfg, "corpus", &[Split::Train])?;
    let members = plan_stack(cfg)?;
    let tag_cfg = cfg.tagger_config()?;
    cfg.out_dir()?;
    let mut rec = Record::default();
    let corpus = load_corpus(cfg, &plan)?;
    let mut stack = loaded_stack(&members, cfg, &mut rec)?;
    let selection = if corpus.dev.is_empty() { Split::Train } else { Split::Dev };
    stack.check_coverage(&corpus, &[Split::Train, selection])?;
    rec.corpus(&corpus);

    let out = create_out_dir(cfg)?;
    let (model, history) = train_tagger_observed(&corpus, &mut stack, &tag_cfg, &mut |ev| {
        if let TrainEvent::EpochEnd(r) = ev {
            let loss = r.train_loss.map_or("-".into(), |l| format!("{l:.4}"));
            println!("epoch {:>3}  loss {loss}  {selection} F1 {:.4}  lr {}", r.epoch, r.dev_f1, r.lr);
        }
    })?;
    println!("best epoch {} ({selection} F1 {:.4})", history.best_epoch, history.epochs[history.best_epoch].dev_f1);
    save_tagger(&model, &out.join(MODEL_FILE))?;
    rec.outputs.push(MODEL_FILE.into());
    rec.write(&out, "train_log.json", to_json(&history))?;
    rec.finish("train", cfg, &out)
}

pub fn evaluate_cmd(cfg: &RunConfig) -> Result<(), CliError> {
    let model_path = cfg.existing_path("model")?;
    let split: Split = cfg.required("split")?.parse()?;
    let plan = plan_corpus(cfg, "corpus", &[split])?;
    let members = plan_stack(cfg)?;
    cfg.out_dir()?;
    let mut rec = Record::default();
    let model: TaggerModel<Real> = load_tagger(&model_path)?;
    let corpus = load_corpus(cfg, &plan)?;
    let mut stack = loaded_stack(&members, cfg, &mut rec)?;
    model.check_corpus(&corpus)?;
    model.check_stack(&stack)?;
    stack.check_coverage(&corpus, &[split])?;
    rec.corpus(&corpus);

    let predicted = predict_split(&model, &mut stack, &corpus, split)?;
    let report = evaluate(corpus.split(split), &predicted)?.named(corpus.name.clone(), stack.label());
    println!("{} {split}: precision {:.4} recall {:.4} F1 {:.4}", corpus.name, report.precision, report.recall, report.f1);
    let mut table = StudyReport::new("evaluate");
    table.push(StudyRow { dataset: corpus.name.clone(), group: corpus.name.clone(), model: stack.label(), report: report.clone() })?;

    let out = create_out_dir(cfg)?;
    rec.write(&out, "report.json", report.to_json())?;
    rec.write(&out, "table.md", render_study(&table, &[]))?;
    rec.finish("evaluate", cfg, &out)
}

pub fn embed(cfg: &RunConfig) -> Result<(), CliError> {
    let plan = plan_corpus(cfg, "corpus", &[])?;
    if plan.splits.is_empty() {
        return Err(CliError::Config("embed needs at least one of corpus.train, corpus.dev, corpus.test".into()));
    }
    let members = plan_stack(cfg)?;
    cfg.out_dir()?;
    let mut rec = Record::default();
    let corpus = load_corpus(cfg, &plan)?;
    let mut stack = loaded_stack(&members, cfg, &mut rec)?;
    let present: Vec<Split> = plan.splits.iter().map(|(s, _)| *s).collect();
    stack.check_coverage(&corpus, &present)?;
    rec.corpus(&corpus);

    stack.reset_memories();
    let mut text = String::new();
    for &split in &present {
        for (index, s) in corpus.split(split).iter().enumerate() {
            let m = stack.embed(s, Some(SentenceRef { split, index }))?;
            for t in 0..m.rows() {
                text.push_str(&format_entry(split, index, t, m.row(t)));
            }
        }
    }
    let out = create_out_dir(cfg)?;
    rec.write(&out, "vectors.txt", text)?;
    rec.finish("embed", cfg, &out)
}

pub fn merge(cfg: &RunConfig) -> Result<(), CliError> {
    let pa = plan_corpus(cfg, "corpus", &[Split::Train, Split::Test])?;
    let pb = plan_corpus(cfg, "corpus2", &[Split::Train, Split::Test])?;
    cfg.out_dir()?;
    let (a, b) = (load_corpus(cfg, &pa)?, load_corpus(cfg, &pb)?);
    let merged = merge_corpora(&a, &b);
    let mut rec = Record::default();
    rec.corpus(&a);
    rec.corpus(&b);
    rec.corpus(&merged);
    println!("{}: train {} dev {} test {}", merged.name, merged.train.len(), merged.dev.len(), merged.test.len());

    let out = create_out_dir(cfg)?;
    for split in Split::ALL {
        rec.write(&out, &format!("{split}.txt"), write_conll(merged.split(split)))?;
    }
    rec.finish("merge", cfg, &out)
}

/// File-system-safe form of a row label.
fn slug(s: &str) -> String {
    let mut out = String::new();
    for c in s.chars() {
        if c.is_ascii_alphanumeric() {
            out.push(c.to_ascii_lowercase());
        } else if !out.ends_with('-') {
            out.push('-');
        }
    }
    out.trim_matches('-').to_string()
}

pub fn study(cfg: &RunConfig) -> Result<(), CliError> {
    let kind: StudyKind = cfg.required("study.kind")?.parse()?;
    let mut plans = vec![plan_corpus(cfg, "corpus", &[Split::Train, Split::Test])?];
    if kind == StudyKind::Merging {
        plans.push(plan_corpus(cfg, "corpus2", &[Split::Train, Split::Test])?);
    }
    let decls: Vec<Vec<MemberDecl>> = if cfg.is_set("study.stacks") {
        cfg.raw("study.stacks")
            .split(';')
            .filter(|s| !s.trim().is_empty())
            .map(|s| parse_stack(s, |p| cfg.resolve("study.stacks", p)))
            .collect::<Result<_, _>>()?
    } else {
        vec![parse_stack(&cfg.required("stack")?, |p| cfg.resolve("stack", p))?]
    };
    for d in &decls {
        check_stack(d, "study.stacks")?;
    }
    let tag_cfg = cfg.tagger_config()?;
    let parallel: bool = cfg.get("parallel")?;
    cfg.out_dir()?;

    let mut rec = Record::default();
    let corpora: Vec<TaggedCorpus> = plans.iter().map(|p| load_corpus(cfg, p)).collect::<Result<_, _>>()?;
    corpora.iter().for_each(|c| rec.corpus(c));
    let stacks: Vec<LabeledStack<Real>> =
        decls.iter().map(|d| loaded_stack(d, cfg, &mut rec).map(LabeledStack::new)).collect::<Result<_, _>>()?;
    let spec = StudySpec { kind, corpora, stacks };
    spec.validate()?;

    let out = create_out_dir(cfg)?;
    let outcome = run_study(&spec, &tag_cfg, parallel)?;
    for (i, (leg, model)) in outcome.legs.iter().zip(&outcome.models).enumerate() {
        let dir = format!("legs/{:02}-{}-{}", i + 1, slug(&leg.dataset), slug(&leg.model));
        let model_file = format!("{dir}/{MODEL_FILE}");
        fs::create_dir_all(out.join(&dir)).map_err(|e| CliError::Output(out.join(&dir), e))?;
        save_tagger(model, &out.join(&model_file))?;
        rec.outputs.push(model_file);
        rec.write(&out, &format!("{dir}/summary.json"), to_json(leg))?;
    }
    let table = render_study(&outcome.report, &[]);
    print!("{table}");
    rec.write(&out, "report.json", outcome.report.to_json())?;
    rec.write(&out, "table.md", table)?;
    rec.finish("study", cfg, &out)
}

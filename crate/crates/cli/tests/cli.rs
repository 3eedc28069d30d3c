use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use ctxtag::charlm::{load_checkpoint, CharLMCheckpoint};
use ctxtag::corpus::{parse_conll, write_conll, ColumnSpec};
use ctxtag::synthetic::{corpus_vocabulary, gazetteer_corpus, gazetteer_raw_text, random_static_table, GazetteerConfig};
use ctxtag::tagger::{load_tagger, TaggerModel};
use serde_json::Value;
use tempfile::TempDir;

fn ctxtag(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ctxtag")).current_dir(dir).args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn ok(o: Output) -> Output {
    assert_eq!(code(&o), 0, "stdout:\n{}\nstderr:\n{}", String::from_utf8_lossy(&o.stdout), stderr(&o));
    o
}

fn manifest(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

/// A scratch directory with two small labelled corpora (`a/`, `b/`), raw text
/// files and a static word table.
struct Workspace {
    tmp: TempDir,
}

const LM_KEYS: &str = "lm.hidden_dim = 8\nlm.embed_dim = 4\nlm.steps = 30\nlm.seq_len = 20\nlm.batch_size = 4\nlm.eval_every = 0\n";
const TAGGER_KEYS: &str = "tagger.hidden_dim = 4\ntagger.max_epochs = 2\nseed = 3\n";

impl Workspace {
    fn new() -> Self {
        let tmp = tempfile::tempdir().unwrap();
        let ws = Workspace { tmp };
        let a = GazetteerConfig { name: "A".into(), train: 30, dev: 6, test: 8, surfaces: 6, ..Default::default() };
        let b = GazetteerConfig { name: "B".into(), types: vec!["DIS".into(), "SPE".into()], seed: 9, ..a.clone() };
        let mut words = Vec::new();
        for (dir, cfg) in [("a", &a), ("b", &b)] {
            let c = gazetteer_corpus(cfg);
            fs::create_dir_all(ws.path(dir)).unwrap();
            fs::write(ws.path(&format!("{dir}/train.txt")), write_conll(&c.train)).unwrap();
            fs::write(ws.path(&format!("{dir}/dev.txt")), write_conll(&c.dev)).unwrap();
            fs::write(ws.path(&format!("{dir}/test.txt")), write_conll(&c.test)).unwrap();
            words.extend(corpus_vocabulary(&c, true));
        }
        words.sort();
        words.dedup();
        fs::write(ws.path("words.txt"), random_static_table::<f64>(&words, 5, 1).unwrap().to_text()).unwrap();
        for (i, seed) in [11u64, 12, 13].iter().enumerate() {
            fs::write(ws.path(&format!("raw{}.txt", i + 1)), gazetteer_raw_text(&a, 4, 3, *seed).join("\n\n")).unwrap();
        }
        ws
    }

    fn path(&self, rel: &str) -> PathBuf {
        self.tmp.path().join(rel)
    }

    fn write_config(&self, name: &str, body: &str) -> String {
        fs::write(self.path(name), body).unwrap();
        name.to_string()
    }

    fn run(&self, args: &[&str]) -> Output {
        ctxtag(self.tmp.path(), args)
    }

    /// Pretrains `lm/<name>` on `raw` and returns the prefix.
    fn pretrain(&self, raw: &str, out: &str) -> String {
        let cfg = self.write_config("pretrain.cfg", &format!("raw_text = {raw}\nout_dir = {out}\n{LM_KEYS}"));
        ok(self.run(&["pretrain", "-c", &cfg]));
        format!("{out}/lm")
    }

    fn corpus_keys(&self, dir: &str, prefix: &str, name: &str) -> String {
        format!(
            "{prefix}.name = {name}\n{prefix}.train = {dir}/train.txt\n{prefix}.dev = {dir}/dev.txt\n{prefix}.test = {dir}/test.txt\n"
        )
    }
}

#[test]
fn pretrain_writes_loadable_pair_deterministically() {
    let ws = Workspace::new();
    let prefix = ws.pretrain("raw1.txt", "v1");
    let fwd: CharLMCheckpoint<f64> = load_checkpoint(&ws.path(&format!("{prefix}.fwd.ctxlm"))).unwrap();
    let bwd: CharLMCheckpoint<f64> = load_checkpoint(&ws.path(&format!("{prefix}.bwd.ctxlm"))).unwrap();
    assert_eq!((fwd.direction.to_string(), bwd.direction.to_string()), ("forward".into(), "backward".into()));
    assert_eq!(fwd.lineage.len(), 1);
    let m = manifest(&ws.path("v1"));
    assert_eq!(m["command"], "pretrain");
    assert_eq!(m["config"]["lm.steps"], "30");
    assert_eq!(m["language_models"].as_array().unwrap().len(), 2);
    assert!(ws.path("v1/pretrain_log.json").exists());

    let again = ws.pretrain("raw1.txt", "v1b");
    for suffix in ["fwd.ctxlm", "bwd.ctxlm"] {
        assert_eq!(
            fs::read(ws.path(&format!("{prefix}.{suffix}"))).unwrap(),
            fs::read(ws.path(&format!("{again}.{suffix}"))).unwrap()
        );
    }
}

#[test]
fn invalid_configs_fail_before_any_output() {
    let ws = Workspace::new();
    let missing = ws.run(&["pretrain", "--set", "raw_text=nope.txt", "--set", "out_dir=out"]);
    assert_eq!(code(&missing), 2, "{}", stderr(&missing));
    assert!(stderr(&missing).contains("nope.txt"));
    assert!(!ws.path("out").exists());

    let unknown = ws.run(&["pretrain", "--set", "raw_text=raw1.txt", "--set", "out_dir=out", "--set", "lm.width=3"]);
    assert_eq!(code(&unknown), 2);
    assert!(stderr(&unknown).contains("lm.width"));

    let cfg = ws.write_config("bad.cfg", "out_dir = out\nraw_text = raw1.txt\nsteps = 3\n");
    assert_eq!(code(&ws.run(&["pretrain", "-c", &cfg])), 2);

    let bad_value = ws.run(&["pretrain", "--set", "raw_text=raw1.txt", "--set", "out_dir=out", "--set", "lm.lr=-1"]);
    assert_eq!(code(&bad_value), 2);
    assert!(!ws.path("out").exists());
}

#[test]
fn flag_overrides_win_over_the_file() {
    let ws = Workspace::new();
    let cfg = ws.write_config("p.cfg", &format!("raw_text = raw1.txt\nout_dir = o\n{LM_KEYS}"));
    ok(ws.run(&["pretrain", "-c", &cfg, "--set", "lm.steps=4"]));
    let fwd: CharLMCheckpoint<f64> = load_checkpoint(&ws.path("o/lm.fwd.ctxlm")).unwrap();
    assert_eq!(fwd.lineage[0].steps, 4);
    assert_eq!(manifest(&ws.path("o"))["config"]["lm.steps"], "4");
}

#[test]
fn config_paths_resolve_against_the_config_file() {
    let ws = Workspace::new();
    fs::create_dir_all(ws.path("conf")).unwrap();
    ws.write_config("conf/p.cfg", &format!("raw_text = ../raw1.txt\nout_dir = ../viaconf\n{LM_KEYS}"));
    ok(ws.run(&["pretrain", "-c", "conf/p.cfg"]));
    assert!(ws.path("viaconf/lm.fwd.ctxlm").exists());
}

#[test]
fn continuation_chain_extends_lineage() {
    let ws = Workspace::new();
    let v1 = ws.pretrain("raw1.txt", "v1");
    let cont = |base: &str, raw: &str, out: &str, steps: &str| {
        ws.run(&[
            "continue", "--set", &format!("lm.base={base}"), "--set", &format!("raw_text={raw}"),
            "--set", &format!("out_dir={out}"), "--set", &format!("lm.steps={steps}"), "--set", "lm.seq_len=20",
            "--set", "lm.eval_every=0",
        ])
    };
    ok(cont(&v1, "raw2.txt", "v2", "20"));
    ok(cont("v2/lm", "raw3.txt", "v3", "10"));
    let v3: CharLMCheckpoint<f64> = load_checkpoint(&ws.path("v3/lm.bwd.ctxlm")).unwrap();
    let lineage: Vec<(&str, u64)> = v3.lineage.iter().map(|r| (r.corpus.as_str(), r.steps)).collect();
    assert_eq!(lineage, [("raw1", 30), ("raw2", 20), ("raw3", 10)]);
    let m = manifest(&ws.path("v3"));
    assert_eq!(m["language_models"][1]["lineage"].as_array().unwrap().len(), 3);

    ok(cont(&v1, "raw2.txt", "v1same", "0"));
    let a: CharLMCheckpoint<f64> = load_checkpoint(&ws.path("v1/lm.fwd.ctxlm")).unwrap();
    let b: CharLMCheckpoint<f64> = load_checkpoint(&ws.path("v1same/lm.fwd.ctxlm")).unwrap();
    assert_eq!((&a.char_embed, &a.lstm, &a.out_proj, &a.out_bias), (&b.char_embed, &b.lstm, &b.out_proj, &b.out_bias));
    assert_eq!(b.lineage.len(), 2);

    let missing = cont("nowhere/lm", "raw2.txt", "vx", "5");
    assert_eq!(code(&missing), 2);
    assert!(stderr(&missing).contains("nowhere/lm.fwd.ctxlm"));
    let wrong_dims = ws.run(&["continue", "--set", &format!("lm.base={v1}"), "--set", "raw_text=raw2.txt", "--set", "out_dir=vy", "--set", "lm.hidden_dim=9"]);
    assert_eq!(code(&wrong_dims), 2);
    assert!(!ws.path("vy").exists());
}

fn train_config(ws: &Workspace, stack: &str, out: &str) -> String {
    let body = format!("{}stack = {stack}\nout_dir = {out}\n{TAGGER_KEYS}", ws.corpus_keys("a", "corpus", "A"));
    ws.write_config(&format!("{out}.cfg"), &body)
}

#[test]
fn train_and_evaluate() {
    let ws = Workspace::new();
    let lm = ws.pretrain("raw1.txt", "v1");
    let stack = format!("contextual:{lm}@LM, static:words.txt@words");
    let cfg = train_config(&ws, &stack, "run");
    let out = ok(ws.run(&["train", "-c", &cfg]));
    assert!(String::from_utf8_lossy(&out.stdout).contains("best epoch"));
    let model: TaggerModel<f64> = load_tagger(&ws.path("run/model.ctxtag")).unwrap();
    assert_eq!(model.tag_set.entity_types(), ["CHEM", "DIS"]);
    let log: Value = serde_json::from_str(&fs::read_to_string(ws.path("run/train_log.json")).unwrap()).unwrap();
    assert_eq!(log["epochs"].as_array().unwrap().len(), 3);
    let m = manifest(&ws.path("run"));
    assert_eq!(m["corpora"][0]["name"], "A");
    assert_eq!(m["language_models"][0]["lineage"][0]["corpus"], "raw1");

    ok(ws.run(&["evaluate", "-c", &cfg, "--set", "model=run/model.ctxtag", "--set", "out_dir=eval"]));
    let report: Value = serde_json::from_str(&fs::read_to_string(ws.path("eval/report.json")).unwrap()).unwrap();
    assert_eq!(report["corpus"], "A");
    assert_eq!(report["model"], "LM + words");
    let table = fs::read_to_string(ws.path("eval/table.md")).unwrap();
    assert!(table.contains("| A | LM + words | **"), "{table}");

    // Zero epochs: the saved model is the initialisation, and scoring it is not an error.
    ok(ws.run(&["train", "-c", &cfg, "--set", "tagger.max_epochs=0", "--set", "out_dir=init"]));
    let init: Value = serde_json::from_str(&fs::read_to_string(ws.path("init/train_log.json")).unwrap()).unwrap();
    assert_eq!(init["epochs"].as_array().unwrap().len(), 1);
    ok(ws.run(&["evaluate", "-c", &cfg, "--set", "model=init/model.ctxtag", "--set", "out_dir=eval0"]));

    // A model for types {CHEM, DIS} cannot score corpus B with type SPE.
    let other = ws.run(&[
        "evaluate", "-c", &cfg, "--set", "model=run/model.ctxtag", "--set", "out_dir=evalb",
        "--set", "corpus.test=b/test.txt", "--set", "corpus.train=b/train.txt", "--set", "corpus.dev=b/dev.txt",
    ]);
    assert_eq!(code(&other), 3, "{}", stderr(&other));
    assert!(stderr(&other).contains("tag-set"), "{}", stderr(&other));
    assert!(!ws.path("evalb").exists());

    // A different stack than the model was trained with is rejected.
    let narrow = ws.run(&["evaluate", "-c", &cfg, "--set", "model=run/model.ctxtag", "--set", "out_dir=e2", "--set", "stack=static:words.txt"]);
    assert_eq!(code(&narrow), 2, "{}", stderr(&narrow));
}

#[test]
fn embed_output_feeds_an_external_stack() {
    let ws = Workspace::new();
    let cfg = train_config(&ws, "static:words.txt", "emb");
    ok(ws.run(&["embed", "-c", &cfg]));
    let vectors = fs::read_to_string(ws.path("emb/vectors.txt")).unwrap();
    let corpus = |f: &str| parse_conll(&fs::read_to_string(ws.path(f)).unwrap(), ColumnSpec::default()).unwrap();
    let tokens: usize = ["a/train.txt", "a/dev.txt", "a/test.txt"].iter().map(|f| corpus(f).iter().map(|s| s.len()).sum::<usize>()).sum();
    assert_eq!(vectors.lines().count(), tokens);
    assert!(vectors.starts_with("train 0 0 "), "{}", &vectors[..40]);

    ok(ws.run(&["train", "-c", &cfg, "--set", "stack=external:emb/vectors.txt", "--set", "out_dir=ext"]));

    // Vectors for corpus A do not cover corpus B's longer sentences.
    let b = ws.run(&[
        "train", "-c", &cfg, "--set", "stack=external:emb/vectors.txt", "--set", "out_dir=extb",
        "--set", "corpus.train=b/train.txt", "--set", "corpus.dev=b/dev.txt", "--set", "corpus.test=b/test.txt",
    ]);
    assert_eq!(code(&b), 3, "{}", stderr(&b));
    assert!(stderr(&b).contains("do not cover ("), "{}", stderr(&b));
}

#[test]
fn merge_writes_concatenated_splits() {
    let ws = Workspace::new();
    let body = format!("{}{}out_dir = merged\n", ws.corpus_keys("a", "corpus", "A"), ws.corpus_keys("b", "corpus2", "B"));
    let cfg = ws.write_config("merge.cfg", &body);
    ok(ws.run(&["merge", "-c", &cfg]));
    let count = |f: &str| parse_conll(&fs::read_to_string(ws.path(f)).unwrap(), ColumnSpec::default()).unwrap().len();
    assert_eq!(count("merged/train.txt"), count("a/train.txt") + count("b/train.txt"));
    assert_eq!(count("merged/dev.txt"), count("a/dev.txt") + count("b/dev.txt"));
    assert_eq!(fs::read_to_string(ws.path("merged/test.txt")).unwrap(), fs::read_to_string(ws.path("a/test.txt")).unwrap());
    assert_eq!(manifest(&ws.path("merged"))["corpora"][2]["name"], "A(+B)");
}

#[test]
fn studies_emit_their_tables() {
    let ws = Workspace::new();
    let both = format!("{}{}{TAGGER_KEYS}", ws.corpus_keys("a", "corpus", "A"), ws.corpus_keys("b", "corpus2", "B"));
    let cfg = ws.write_config("study.cfg", &format!("{both}study.kind = merging\nstack = static:words.txt@words\nout_dir = merging\n"));
    ok(ws.run(&["study", "-c", &cfg]));
    let report: Value = serde_json::from_str(&fs::read_to_string(ws.path("merging/report.json")).unwrap()).unwrap();
    let labels: Vec<&str> = report["rows"].as_array().unwrap().iter().map(|r| r["dataset"].as_str().unwrap()).collect();
    assert_eq!(labels, ["A", "A (+B)", "B", "B (+A)"]);
    let table = fs::read_to_string(ws.path("merging/table.md")).unwrap();
    assert_eq!(table.lines().count(), 6);
    assert!(ws.path("merging/legs/02-a-b-words/model.ctxtag").exists());

    // Same seed, parallel legs: identical report and models.
    ok(ws.run(&["study", "-c", &cfg, "--set", "parallel=true", "--set", "out_dir=merging-par"]));
    for f in ["report.json", "table.md", "legs/04-b-a-words/model.ctxtag"] {
        assert_eq!(fs::read(ws.path(&format!("merging/{f}"))).unwrap(), fs::read(ws.path(&format!("merging-par/{f}"))).unwrap(), "{f}");
    }

    let lm = ws.pretrain("raw1.txt", "v1");
    let stacks = format!("contextual:{lm}@LM; contextual:{lm}@LM, static:words.txt@words; pooled:{lm}@pooled LM, static:words.txt@words");
    ok(ws.run(&["study", "-c", &cfg, "--set", "study.kind=stacking", "--set", &format!("study.stacks={stacks}"), "--set", "out_dir=stacking", "--set", "pool=max"]));
    let table = fs::read_to_string(ws.path("stacking/table.md")).unwrap();
    let models: Vec<&str> = table.lines().skip(2).map(|l| l.split(" | ").nth(1).unwrap()).collect();
    assert_eq!(models, ["LM", "LM + words", "pooled LM + words"]);

    let one_stage = ws.run(&["study", "-c", &cfg, "--set", "study.kind=pretrain-amount", "--set", &format!("study.stacks=contextual:{lm}"), "--set", "out_dir=pa"]);
    assert_eq!(code(&one_stage), 2, "{}", stderr(&one_stage));
    assert!(stderr(&one_stage).contains("at least 2"), "{}", stderr(&one_stage));
    assert!(!ws.path("pa").exists());
}

#[test]
fn diverging_training_exits_with_numeric_code() {
    let ws = Workspace::new();
    let cfg = ws.write_config("p.cfg", &format!("raw_text = raw1.txt\nout_dir = nan\n{LM_KEYS}lm.lr = 1e308\nlm.clip_norm = 1e308\n"));
    let o = ws.run(&["pretrain", "-c", &cfg]);
    assert_eq!(code(&o), 4, "{}", stderr(&o));
    assert!(stderr(&o).contains("step"), "{}", stderr(&o));
}

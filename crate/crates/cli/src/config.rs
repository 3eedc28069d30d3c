//! Flat `key = value` run configuration.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use ctxtag::charlm::LmTrainConfig;
use ctxtag::corpus::ColumnSpec;
use ctxtag::tagger::{TagTrainConfig, TaggerDims};

use crate::CliError;

/// Every key the CLI understands, with its default (empty = no default).
const KEYS: &[(&str, &str)] = &[
    ("seed", "42"),
    ("out_dir", ""),
    ("parallel", "false"),
    // Pretraining text and language models.
    ("raw_text", ""),
    ("lm.name", "lm"),
    ("lm.base", ""),
    ("lm.hidden_dim", "64"),
    ("lm.embed_dim", "16"),
    ("lm.steps", "1000"),
    ("lm.seq_len", "50"),
    ("lm.batch_size", "8"),
    ("lm.lr", "1.0"),
    ("lm.lr_anneal", "0.5"),
    ("lm.patience", "1"),
    ("lm.min_freq", "1"),
    ("lm.clip_norm", "5.0"),
    ("lm.eval_every", "100"),
    ("lm.heldout_fraction", "0.05"),
    // Labelled corpora.
    ("corpus.name", "corpus"),
    ("corpus.train", ""),
    ("corpus.dev", ""),
    ("corpus.test", ""),
    ("corpus2.name", "corpus2"),
    ("corpus2.train", ""),
    ("corpus2.dev", ""),
    ("corpus2.test", ""),
    ("columns.token", "0"),
    ("columns.label", "last"),
    // Embedders and tagger.
    ("stack", ""),
    ("pool", "mean"),
    ("model", ""),
    ("split", "test"),
    ("tagger.hidden_dim", "32"),
    ("tagger.reproj_width", "256"),
    ("tagger.bio_constraints", "false"),
    ("tagger.lr", "0.1"),
    ("tagger.anneal", "0.5"),
    ("tagger.patience", "3"),
    ("tagger.max_epochs", "20"),
    ("tagger.batch_size", "8"),
    ("tagger.clip_norm", "5.0"),
    ("tagger.reset_memory_each_epoch", "true"),
    // Studies.
    ("study.kind", ""),
    ("study.stacks", ""),
];

#[derive(Debug, Clone, PartialEq)]
struct Entry {
    value: String,
    /// Relative paths in `value` are resolved against this directory: the
    /// config file's for file entries, the working directory for overrides.
    base: PathBuf,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    values: BTreeMap<String, Entry>,
    base_dir: PathBuf,
}

fn known(key: &str) -> Result<(), CliError> {
    if KEYS.iter().any(|(k, _)| *k == key) {
        Ok(())
    } else {
        Err(CliError::Config(format!("unknown config key {key:?}")))
    }
}

fn split_assignment(line: &str) -> Option<(String, String)> {
    let (k, v) = line.split_once('=')?;
    Some((k.trim().to_string(), v.trim().to_string()))
}

impl RunConfig {
    /// Parses config text. Blank lines and lines starting with `#` are skipped.
    pub fn parse(text: &str, base_dir: impl Into<PathBuf>) -> Result<Self, CliError> {
        let base_dir = base_dir.into();
        let mut values = BTreeMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = split_assignment(line)
                .ok_or_else(|| CliError::Config(format!("config line {}: expected key = value, got {line:?}", n + 1)))?;
            known(&k)?;
            let entry = Entry { value: v, base: base_dir.clone() };
            if values.insert(k.clone(), entry).is_some() {
                return Err(CliError::Config(format!("config line {}: key {k:?} set twice", n + 1)));
            }
        }
        Ok(RunConfig { values, base_dir })
    }

    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        match path {
            None => Self::parse("", "."),
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", p.display())))?;
                let dir = p.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
                Self::parse(&text, dir)
            }
        }
    }

    /// Applies `key=value` overrides; a flag wins over the file. Override
    /// paths are taken relative to the working directory.
    pub fn apply_overrides(&mut self, overrides: &[String]) -> Result<(), CliError> {
        for o in overrides {
            let (k, v) =
                split_assignment(o).ok_or_else(|| CliError::Config(format!("--set expects key=value, got {o:?}")))?;
            known(&k)?;
            self.values.insert(k, Entry { value: v, base: PathBuf::from(".") });
        }
        Ok(())
    }

    /// All keys with their effective values, defaults included.
    pub fn snapshot(&self) -> BTreeMap<String, String> {
        KEYS.iter()
            .map(|(k, d)| (k.to_string(), self.values.get(*k).map_or_else(|| d.to_string(), |e| e.value.clone())))
            .collect()
    }

    pub fn raw(&self, key: &str) -> String {
        debug_assert!(known(key).is_ok(), "{key}");
        self.values
            .get(key)
            .map(|e| e.value.clone())
            .unwrap_or_else(|| KEYS.iter().find(|(k, _)| *k == key).map(|(_, d)| d.to_string()).unwrap_or_default())
    }

    /// Whether `key` was given in the file or as an override.
    pub fn explicit(&self, key: &str) -> bool {
        self.values.contains_key(key)
    }

    pub fn is_set(&self, key: &str) -> bool {
        !self.raw(key).is_empty()
    }

    pub fn required(&self, key: &str) -> Result<String, CliError> {
        let v = self.raw(key);
        if v.is_empty() {
            Err(CliError::Config(format!("missing required key {key:?}")))
        } else {
            Ok(v)
        }
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<T, CliError> {
        let v = self.required(key)?;
        v.parse().map_err(|_| CliError::Config(format!("bad value {v:?} for {key:?}")))
    }

    /// Resolves a path written in the value of `key`.
    pub fn resolve(&self, key: &str, raw: &str) -> PathBuf {
        let p = Path::new(raw);
        if p.is_absolute() {
            return p.to_path_buf();
        }
        let base = self.values.get(key).map_or(&self.base_dir, |e| &e.base);
        if base == Path::new(".") {
            p.to_path_buf()
        } else {
            base.join(p)
        }
    }

    /// A path that must already exist.
    pub fn existing_path(&self, key: &str) -> Result<PathBuf, CliError> {
        let p = self.resolve(key, &self.required(key)?);
        must_exist(&p, key)?;
        Ok(p)
    }

    pub fn optional_existing_path(&self, key: &str) -> Result<Option<PathBuf>, CliError> {
        if self.is_set(key) {
            self.existing_path(key).map(Some)
        } else {
            Ok(None)
        }
    }

    pub fn out_dir(&self) -> Result<PathBuf, CliError> {
        Ok(self.resolve("out_dir", &self.required("out_dir")?))
    }

    pub fn seed(&self) -> Result<u64, CliError> {
        self.get("seed")
    }

    pub fn columns(&self) -> Result<ColumnSpec, CliError> {
        let label_col = match self.raw("columns.label").as_str() {
            "last" => None,
            _ => Some(self.get("columns.label")?),
        };
        Ok(ColumnSpec { token_col: self.get("columns.token")?, label_col })
    }

    pub fn lm_config(&self) -> Result<LmTrainConfig, CliError> {
        let cfg = LmTrainConfig {
            seq_len: self.get("lm.seq_len")?,
            batch_size: self.get("lm.batch_size")?,
            lr: self.get("lm.lr")?,
            lr_anneal: self.get("lm.lr_anneal")?,
            patience: self.get("lm.patience")?,
            steps: self.get("lm.steps")?,
            seed: self.seed()?,
            hidden_dim: self.get("lm.hidden_dim")?,
            embed_dim: self.get("lm.embed_dim")?,
            min_freq: self.get("lm.min_freq")?,
            clip_norm: self.get("lm.clip_norm")?,
            eval_every: self.get("lm.eval_every")?,
            heldout_fraction: self.get("lm.heldout_fraction")?,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn tagger_config(&self) -> Result<TagTrainConfig, CliError> {
        let cfg = TagTrainConfig {
            lr: self.get("tagger.lr")?,
            anneal: self.get("tagger.anneal")?,
            patience: self.get("tagger.patience")?,
            max_epochs: self.get("tagger.max_epochs")?,
            batch_size: self.get("tagger.batch_size")?,
            clip_norm: self.get("tagger.clip_norm")?,
            seed: self.seed()?,
            dims: TaggerDims {
                hidden_dim: self.get("tagger.hidden_dim")?,
                reproj_width: self.get("tagger.reproj_width")?,
                bio_constraints: self.get("tagger.bio_constraints")?,
            },
            reset_memory_each_epoch: self.get("tagger.reset_memory_each_epoch")?,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

pub fn must_exist(p: &Path, what: &str) -> Result<(), CliError> {
    if p.exists() {
        Ok(())
    } else {
        Err(CliError::Config(format!("{what}: {} does not exist", p.display())))
    }
}

/// Comma-separated list, empty entries dropped.
pub fn list(v: &str) -> Vec<String> {
    v.split(',').map(str::trim).filter(|s| !s.is_empty()).map(str::to_string).collect()
}

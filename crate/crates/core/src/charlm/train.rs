use serde::Serialize;

use crate::corpus::CharStream;
use crate::error::{Error, Result};
use crate::numerics::rng::{fan_in_uniform, seeded};
use crate::numerics::{lstm_step_projected, sgd_step, LstmCellParams, LstmIds, Matrix, ParamId, ParamSet, Tape, Var};
use crate::scalar::Scalar;

use super::{build_char_vocab, CharLMCheckpoint, Direction, LineageRecord, SENTINEL_ID};

/// Hyperparameters for (continued) language-model pretraining.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LmTrainConfig {
    /// Truncated-BPTT window length.
    pub seq_len: usize,
    /// Number of parallel lanes the stream is cut into.
    pub batch_size: usize,
    /// Zero freezes the parameters (the run only extends the lineage).
    pub lr: f64,
    pub lr_anneal: f64,
    /// Evaluations without improvement before the learning rate is annealed.
    pub patience: usize,
    pub steps: u64,
    pub seed: u64,
    pub hidden_dim: usize,
    pub embed_dim: usize,
    pub min_freq: usize,
    pub clip_norm: f64,
    /// Steps between held-out evaluations; 0 disables evaluation and annealing.
    pub eval_every: u64,
    /// Tail fraction of the stream held out for annealing decisions. When the
    /// held-out part is shorter than two characters the mean training loss of
    /// the last interval is used instead.
    pub heldout_fraction: f64,
}

impl Default for LmTrainConfig {
    fn default() -> Self {
        LmTrainConfig {
            seq_len: 50,
            batch_size: 8,
            lr: 1.0,
            lr_anneal: 0.5,
            patience: 1,
            steps: 1000,
            seed: 42,
            hidden_dim: 64,
            embed_dim: 16,
            min_freq: 1,
            clip_norm: 5.0,
            eval_every: 100,
            heldout_fraction: 0.05,
        }
    }
}

impl LmTrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.seq_len == 0 || self.batch_size == 0 {
            return bad("seq_len and batch_size must be positive".into());
        }
        if self.hidden_dim == 0 || self.embed_dim == 0 {
            return bad("hidden_dim and embed_dim must be positive".into());
        }
        if !(self.lr >= 0.0) || !self.lr.is_finite() {
            return bad(format!("lr must be finite and non-negative, got {}", self.lr));
        }
        if !(self.lr_anneal > 0.0 && self.lr_anneal <= 1.0) {
            return bad(format!("lr_anneal must lie in (0, 1], got {}", self.lr_anneal));
        }
        if !(self.clip_norm > 0.0) {
            return bad(format!("clip_norm must be positive, got {}", self.clip_norm));
        }
        if !(0.0..1.0).contains(&self.heldout_fraction) {
            return bad(format!(
                "heldout_fraction must lie in [0, 1), got {}",
                self.heldout_fraction
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct LmEvaluation {
    pub step: u64,
    pub loss: f64,
    pub lr: f64,
}

/// Per-step training loss and periodic evaluations.
#[derive(Debug, Clone, Default, Serialize)]
pub struct LmTrainLog {
    pub losses: Vec<f64>,
    pub evaluations: Vec<LmEvaluation>,
}

impl LmTrainLog {
    /// Mean of the last `n` step losses.
    pub fn recent_loss(&self, n: usize) -> Option<f64> {
        let k = self.losses.len().min(n);
        (k > 0).then(|| self.losses[self.losses.len() - k..].iter().sum::<f64>() / k as f64)
    }
}

pub fn train_lm<T: Scalar>(
    stream: &CharStream,
    direction: Direction,
    cfg: &LmTrainConfig,
) -> Result<CharLMCheckpoint<T>> {
    train_lm_logged(stream, direction, cfg).map(|(c, _)| c)
}

/// Fresh pretraining on `stream`; the vocabulary is built from the training part.
pub fn train_lm_logged<T: Scalar>(
    stream: &CharStream,
    direction: Direction,
    cfg: &LmTrainConfig,
) -> Result<(CharLMCheckpoint<T>, LmTrainLog)> {
    cfg.validate()?;
    if stream.is_empty() {
        return Err(Error::Config(format!("pretraining stream {} is empty", stream.source)));
    }
    let (train_part, heldout) = split_heldout(stream, cfg.heldout_fraction);
    let vocab = build_char_vocab(&train_part, cfg.min_freq);
    let v = vocab.len();
    let mut rng = seeded(cfg.seed);
    let char_embed = fan_in_uniform(&mut rng, v, cfg.embed_dim);
    let lstm = LstmCellParams::init(cfg.embed_dim, cfg.hidden_dim, &mut rng);
    let out_proj = fan_in_uniform(&mut rng, v, cfg.hidden_dim);
    let mut ckpt = CharLMCheckpoint {
        direction,
        vocab,
        char_embed,
        lstm,
        out_proj,
        out_bias: Matrix::zeros(v, 1),
        lineage: Vec::new(),
    };
    let log = run(&mut ckpt, &train_part, heldout.as_ref(), cfg)?;
    Ok((ckpt, log))
}

/// Resumes training of `ckpt` on `stream` with its frozen vocabulary.
pub fn continue_pretrain<T: Scalar>(
    ckpt: &CharLMCheckpoint<T>,
    stream: &CharStream,
    cfg: &LmTrainConfig,
) -> Result<(CharLMCheckpoint<T>, LmTrainLog)> {
    cfg.validate()?;
    ckpt.validate()?;
    if cfg.hidden_dim != ckpt.hidden_dim() || cfg.embed_dim != ckpt.embed_dim() {
        return Err(Error::Checkpoint(format!(
            "config dims (E={}, H={}) differ from checkpoint dims (E={}, H={})",
            cfg.embed_dim,
            cfg.hidden_dim,
            ckpt.embed_dim(),
            ckpt.hidden_dim()
        )));
    }
    if stream.is_empty() {
        return Err(Error::Config(format!("pretraining stream {} is empty", stream.source)));
    }
    let (train_part, heldout) = split_heldout(stream, cfg.heldout_fraction);
    let mut next = ckpt.clone();
    let log = run(&mut next, &train_part, heldout.as_ref(), cfg)?;
    Ok((next, log))
}

fn split_heldout(stream: &CharStream, fraction: f64) -> (CharStream, Option<CharStream>) {
    if fraction <= 0.0 {
        return (stream.clone(), None);
    }
    let (train, held) = stream.split_tail(fraction);
    if held.len() < 2 || train.len() < 2 {
        (stream.clone(), None)
    } else {
        (train, Some(held))
    }
}

struct LmParamIds {
    embed: ParamId,
    lstm: LstmIds,
    out: ParamId,
    out_bias: ParamId,
}

fn to_params<T: Scalar>(ckpt: &CharLMCheckpoint<T>) -> (ParamSet<T>, LmParamIds) {
    let mut ps = ParamSet::new();
    let embed = ps.add("char_embed", ckpt.char_embed.clone());
    let lstm = LstmIds::register(&mut ps, "lstm", &ckpt.lstm);
    let out = ps.add("out_proj", ckpt.out_proj.clone());
    let out_bias = ps.add("out_bias", ckpt.out_bias.clone());
    (ps, LmParamIds { embed, lstm, out, out_bias })
}

fn write_back<T: Scalar>(ps: &ParamSet<T>, ids: &LmParamIds, ckpt: &mut CharLMCheckpoint<T>) {
    ckpt.char_embed = ps.value(ids.embed).clone();
    ckpt.lstm = ids.lstm.extract(ps);
    ckpt.out_proj = ps.value(ids.out).clone();
    ckpt.out_bias = ps.value(ids.out_bias).clone();
}

/// Mean cross-entropy of one truncated-BPTT window, recorded on `tape`.
/// `inputs`/`targets` are time-major: entry `t * lanes + b`.
#[allow(clippy::too_many_arguments)]
fn window_loss<T: Scalar>(
    tape: &mut Tape<T>,
    ps: &ParamSet<T>,
    ids: &LmParamIds,
    inputs: &[usize],
    targets: &[usize],
    lanes: usize,
    h0: Matrix<T>,
    c0: Matrix<T>,
) -> Result<(Var, Var, Var)> {
    let embed = tape.param(ps, ids.embed);
    let lstm = ids.lstm.bind(tape, ps);
    let out = tape.param(ps, ids.out);
    let out_bias = tape.param(ps, ids.out_bias);

    let x = tape.lookup(embed, inputs)?;
    let xw = tape.matmul(lstm.w, x)?;
    let mut h = tape.constant(h0);
    let mut c = tape.constant(c0);
    let steps = inputs.len() / lanes;
    let mut hs = Vec::with_capacity(steps);
    for t in 0..steps {
        let cols = &inputs[t * lanes..(t + 1) * lanes];
        if cols.contains(&SENTINEL_ID) {
            let mask: Vec<T> = cols
                .iter()
                .map(|&i| if i == SENTINEL_ID { T::zero() } else { T::one() })
                .collect();
            h = tape.scale_cols(h, mask.clone())?;
            c = tape.scale_cols(c, mask)?;
        }
        let xt = tape.slice_cols(xw, t * lanes, (t + 1) * lanes)?;
        let (hn, cn) = lstm_step_projected(tape, &lstm, xt, h, c)?;
        hs.push(hn);
        h = hn;
        c = cn;
    }
    let all_h = tape.concat_cols(&hs)?;
    let logits = tape.matmul(out, all_h)?;
    let logits = tape.add_bias(logits, out_bias)?;
    let rows = tape.transpose(logits);
    let logp = tape.log_softmax_rows(rows);
    let picked = tape.pick(logp, targets.iter().copied().enumerate().collect())?;
    let total = tape.sum(picked);
    let n = T::from_usize(targets.len()).unwrap();
    let loss = tape.scale(total, -T::one() / n);
    Ok((loss, h, c))
}

fn run<T: Scalar>(
    ckpt: &mut CharLMCheckpoint<T>,
    train: &CharStream,
    heldout: Option<&CharStream>,
    cfg: &LmTrainConfig,
) -> Result<LmTrainLog> {
    let mut log = LmTrainLog::default();
    let ids = ckpt.oriented_ids(&ckpt.vocab.encode(&train.chars));
    let held_ids = heldout.map(|h| ckpt.oriented_ids(&ckpt.vocab.encode(&h.chars)));
    let corpus = train.source.clone();

    if cfg.steps > 0 {
        if ids.len() < 2 {
            return Err(Error::Config(format!(
                "stream {corpus} needs at least two characters to train"
            )));
        }
        let lanes = cfg.batch_size.min(ids.len() - 1);
        let lane_len = (ids.len() - 1) / lanes;
        let hd = ckpt.hidden_dim();
        let (mut ps, pids) = to_params(ckpt);
        let mut h = Matrix::zeros(hd, lanes);
        let mut c = Matrix::zeros(hd, lanes);
        let mut offset = 0;
        let mut lr = cfg.lr;
        let mut best = f64::INFINITY;
        let mut bad_evals = 0;
        let mut interval = (0.0, 0usize);

        for step in 0..cfg.steps {
            if offset >= lane_len {
                offset = 0;
                h.fill(T::zero());
                c.fill(T::zero());
            }
            let w = cfg.seq_len.min(lane_len - offset);
            let mut inputs = Vec::with_capacity(w * lanes);
            let mut targets = Vec::with_capacity(w * lanes);
            for t in 0..w {
                for b in 0..lanes {
                    let p = b * lane_len + offset + t;
                    inputs.push(ids[p]);
                    targets.push(ids[p + 1]);
                }
            }
            let mut tape = Tape::new();
            let (loss, hn, cn) = window_loss(
                &mut tape,
                &ps,
                &pids,
                &inputs,
                &targets,
                lanes,
                h,
                c,
            )?;
            let lv = tape.value(loss).item();
            if !lv.is_finite() {
                return Err(Error::Numeric(format!(
                    "language-model loss became {lv} at step {step}"
                )));
            }
            if lr > 0.0 {
                tape.backward(loss, &mut ps)?;
                sgd_step(&mut ps, T::lit(lr), T::lit(cfg.clip_norm))?;
            }
            h = tape.value(hn).clone();
            c = tape.value(cn).clone();
            offset += w;
            log.losses.push(lv.to_f64_lossy());
            interval.0 += lv.to_f64_lossy();
            interval.1 += 1;

            if cfg.eval_every > 0 && (step + 1) % cfg.eval_every == 0 {
                let eval_loss = match &held_ids {
                    Some(hids) => {
                        write_back(&ps, &pids, ckpt);
                        ckpt.mean_nll_oriented(hids)?
                            .map(|v| v.to_f64_lossy())
                            .unwrap_or(f64::INFINITY)
                    }
                    None => interval.0 / interval.1 as f64,
                };
                interval = (0.0, 0);
                if eval_loss < best {
                    best = eval_loss;
                    bad_evals = 0;
                } else {
                    bad_evals += 1;
                    if bad_evals >= cfg.patience.max(1) {
                        lr *= cfg.lr_anneal;
                        bad_evals = 0;
                    }
                }
                log.evaluations.push(LmEvaluation {
                    step: step + 1,
                    loss: eval_loss,
                    lr,
                });
            }
        }
        write_back(&ps, &pids, ckpt);
    }

    ckpt.lineage.push(LineageRecord {
        corpus,
        steps: cfg.steps,
    });
    Ok(log)
}

/// The truncated-BPTT window loss with parameters held in a [`ParamSet`],
/// exposed for gradient checking and custom training loops.
pub struct WindowLoss {
    ids: LmParamIds,
    hidden_dim: usize,
}

impl WindowLoss {
    pub fn new<T: Scalar>(ckpt: &CharLMCheckpoint<T>) -> (ParamSet<T>, Self) {
        let (ps, ids) = to_params(ckpt);
        let hidden_dim = ckpt.hidden_dim();
        (ps, WindowLoss { ids, hidden_dim })
    }

    /// Mean cross-entropy of predicting `targets` from `inputs` (time-major,
    /// `lanes` columns per step) starting from a zero state.
    pub fn record<T: Scalar>(
        &self,
        tape: &mut Tape<T>,
        ps: &ParamSet<T>,
        inputs: &[usize],
        targets: &[usize],
        lanes: usize,
    ) -> Result<Var> {
        if lanes == 0 || inputs.len() != targets.len() || !inputs.len().is_multiple_of(lanes) {
            return Err(Error::Config(format!(
                "window of {} inputs / {} targets does not fit {lanes} lanes",
                inputs.len(),
                targets.len()
            )));
        }
        let zeros = Matrix::zeros(self.hidden_dim, lanes);
        let (loss, _, _) = window_loss(tape, ps, &self.ids, inputs, targets, lanes, zeros.clone(), zeros)?;
        Ok(loss)
    }
}

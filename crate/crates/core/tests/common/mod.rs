#![allow(dead_code)]

use ctxtag::charlm::{CharLMCheckpoint, CharVocabulary, Direction};
use ctxtag::numerics::rng::{fan_in_uniform, seeded, Rng};
use ctxtag::corpus::TaggedCorpus;
use ctxtag::embeddings::{ContextualEmbedder, Embedder, EmbedderStack, PoolOp, PooledEmbedder, StaticTable};
use ctxtag::numerics::{LstmCellParams, Matrix, ParamSet};
use ctxtag::tagger::{TagSet, TaggerDims, TaggerLoss, TaggerModel};
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};

pub fn normal_matrix(rng: &mut Rng, rows: usize, cols: usize) -> Matrix<f64> {
    let data = (0..rows * cols).map(|_| StandardNormal.sample(rng)).collect();
    Matrix::from_vec(rows, cols, data).unwrap()
}

/// Every tag sequence of length `t` over `k` tags, lexicographic order.
pub fn all_paths(t: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    for _ in 0..t {
        out = out
            .into_iter()
            .flat_map(|p| {
                (0..k).map(move |j| {
                    let mut q = p.clone();
                    q.push(j);
                    q
                })
            })
            .collect();
    }
    out
}

/// Path score summed right to left:
/// `(trans[S,p0] + e[0,p0]) + ((trans[p0,p1] + e[1,p1]) + (… + trans[pT-1,STOP]))`.
pub fn nested_score(e: &Matrix<f64>, trans: &Matrix<f64>, path: &[usize]) -> f64 {
    let k = e.cols();
    let n = path.len();
    let mut tail = trans[(path[n - 1], k + 1)];
    for t in (0..n - 1).rev() {
        tail = (trans[(path[t], path[t + 1])] + e[(t + 1, path[t + 1])]) + tail;
    }
    (trans[(k, path[0])] + e[(0, path[0])]) + tail
}

pub fn brute_log_partition(e: &Matrix<f64>, trans: &Matrix<f64>) -> f64 {
    let scores: Vec<f64> = all_paths(e.rows(), e.cols())
        .iter()
        .map(|p| nested_score(e, trans, p))
        .collect();
    let m = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    m + scores.iter().map(|s| (s - m).exp()).sum::<f64>().ln()
}

/// Randomly initialised language model over `chars`.
pub fn random_lm(direction: Direction, chars: &[char], embed: usize, hidden: usize, seed: u64) -> CharLMCheckpoint<f64> {
    let mut rng = seeded(seed);
    let vocab = CharVocabulary::from_chars(chars.to_vec());
    let v = vocab.len();
    let mut ckpt = CharLMCheckpoint {
        direction,
        char_embed: fan_in_uniform(&mut rng, v, embed),
        lstm: LstmCellParams::init(embed, hidden, &mut rng),
        out_proj: fan_in_uniform(&mut rng, v, hidden),
        out_bias: Matrix::zeros(v, 1),
        vocab,
        lineage: vec![],
    };
    // Spread the embeddings out so hidden states differ noticeably per character.
    ckpt.char_embed.scale_assign(3.0);
    ckpt
}

pub fn static_stack(dim: usize) -> EmbedderStack<f64> {
    let table = StaticTable::from_entries(dim, [("w".to_string(), vec![1.0; dim])]).unwrap();
    EmbedderStack::new(vec![Embedder::Static { label: "s".into(), table }]).unwrap()
}

/// A freshly initialised tagger with a reprojection layer, random transitions
/// and emission bias, plus a random input sequence and gold path.
pub fn tagger_instance(
    tag_set: &TagSet,
    seed: u64,
) -> (ParamSet<f64>, TaggerLoss, Matrix<f64>, Vec<usize>) {
    let mut rng = seeded(seed);
    let d = rng.random_range(5..=8);
    let w = rng.random_range(2..=8);
    let t = rng.random_range(1..=5);
    let dims = TaggerDims { hidden_dim: w, reproj_width: 4, bio_constraints: false };
    let mut model = TaggerModel::init(tag_set.clone(), &static_stack(d), dims, &mut rng).unwrap();
    assert!(model.reproj.is_some());
    let k = tag_set.len();
    for i in 0..k {
        for j in 0..k {
            model.trans[(i, j)] = rng.random_range(-1.0..1.0);
        }
        model.trans[(k, i)] = rng.random_range(-1.0..1.0);
        model.trans[(i, k + 1)] = rng.random_range(-1.0..1.0);
    }
    model.emit_bias = normal_matrix(&mut rng, k, 1);
    let x = normal_matrix(&mut rng, t, d);
    let gold = (0..t).map(|_| rng.random_range(0..k)).collect();
    let (ps, loss) = TaggerLoss::new(&model);
    (ps, loss, x, gold)
}

/// A single-member stack over an untrained forward/backward pair covering
/// the corpus characters; pooled when `pool` is given.
pub fn lm_pair_stack(corpus: &TaggedCorpus, pool: Option<PoolOp>) -> EmbedderStack<f64> {
    let mut chars: Vec<char> = corpus
        .train
        .iter()
        .chain(&corpus.dev)
        .chain(&corpus.test)
        .flat_map(|s| s.tokens.iter().flat_map(|t| t.text.chars()))
        .chain([' '])
        .collect();
    chars.sort_unstable();
    chars.dedup();
    let fwd = random_lm(Direction::Forward, &chars, 4, 4, 21);
    let bwd = random_lm(Direction::Backward, &chars, 4, 4, 22);
    let ctx = ContextualEmbedder::new("lm", fwd, bwd).unwrap();
    let member = match pool {
        Some(op) => Embedder::Pooled(PooledEmbedder::new(ctx, op)),
        None => Embedder::Contextual(ctx),
    };
    EmbedderStack::new(vec![member]).unwrap()
}

/// Random CRF scores: `T ≤ max_t` by `K ≤ max_k` emissions and a
/// `(K+2)×(K+2)` transition matrix, all standard normal.
pub fn crf_instance(seed: u64, max_t: usize, max_k: usize) -> (Matrix<f64>, Matrix<f64>) {
    let mut rng = seeded(seed);
    let t = rng.random_range(1..=max_t);
    let k = rng.random_range(1..=max_k);
    (normal_matrix(&mut rng, t, k), normal_matrix(&mut rng, k + 2, k + 2))
}

/// Scores with several maximising paths, built three ways depending on `seed`.
pub fn tie_instance(seed: u64) -> (Matrix<f64>, Matrix<f64>) {
    let mut rng = seeded(1000 + seed);
    let t = rng.random_range(2..=5);
    let k = rng.random_range(2..=4);
    let mut e: Matrix<f64> = Matrix::zeros(t, k);
    let mut tr: Matrix<f64> = Matrix::zeros(k + 2, k + 2);
    match seed % 3 {
        // Small integer emissions with a forced two-way tie at one position.
        0 | 1 => {
            for i in 0..t {
                for j in 0..k {
                    e[(i, j)] = rng.random_range(0..2) as f64;
                }
            }
            let at = rng.random_range(0..t);
            let (a, b) = (rng.random_range(0..k), rng.random_range(0..k));
            for j in 0..k {
                e[(at, j)] = if j == a || j == (b + 1 + a) % k || j == b { 2.0 } else { 0.0 };
            }
            if seed % 3 == 1 {
                tr.fill(1.0);
            }
        }
        // Parity-symmetric transitions: every alternating path ties.
        _ => {
            for i in 0..k {
                for j in 0..k {
                    tr[(i, j)] = ((i + j) % 2) as f64;
                }
            }
        }
    }
    (e, tr)
}

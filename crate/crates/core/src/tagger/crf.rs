//! Linear-chain CRF over a `T × K` emission matrix and a `(K+2) × (K+2)`
//! transition table whose last two indices are the virtual START and STOP tags.

use crate::error::{Error, Result};
use crate::numerics::{log_sum_exp, CustomOp, Matrix, Tape, Var};
use crate::scalar::Scalar;

/// Score of transitions that must never be taken (into START, out of STOP).
pub const FORBIDDEN: f64 = -1e4;

fn check_shapes<T: Scalar>(e: &Matrix<T>, trans: &Matrix<T>) -> Result<(usize, usize)> {
    let (t, k) = e.shape();
    if trans.shape() != (k + 2, k + 2) {
        return Err(Error::dim("crf.transitions", (k + 2, k + 2), trans.shape()));
    }
    if t == 0 {
        return Err(Error::Model("CRF needs at least one position".into()));
    }
    Ok((t, k))
}

fn check_tags(tags: &[usize], t: usize, k: usize) -> Result<()> {
    if tags.len() != t {
        return Err(Error::dim("crf.tags", (t, 1), (tags.len(), 1)));
    }
    if let Some(&bad) = tags.iter().find(|&&x| x >= k) {
        return Err(Error::Model(format!("tag index {bad} out of range for {k} tags")));
    }
    Ok(())
}

/// Emission plus transition score of one tag sequence.
pub fn score_path<T: Scalar>(e: &Matrix<T>, trans: &Matrix<T>, tags: &[usize]) -> Result<T> {
    let (t, k) = check_shapes(e, trans)?;
    check_tags(tags, t, k)?;
    let (start, stop) = (k, k + 1);
    let mut s = T::zero();
    for (i, &tag) in tags.iter().enumerate() {
        s += e[(i, tag)];
    }
    s += trans[(start, tags[0])];
    for w in tags.windows(2) {
        s += trans[(w[0], w[1])];
    }
    s += trans[(tags[t - 1], stop)];
    Ok(s)
}

/// `alpha[t, k]`: log-sum of all prefixes ending in tag `k` at `t`, emission included.
fn forward_table<T: Scalar>(e: &Matrix<T>, trans: &Matrix<T>) -> Matrix<T> {
    let (t_len, k) = e.shape();
    let mut alpha = Matrix::zeros(t_len, k);
    for j in 0..k {
        alpha[(0, j)] = trans[(k, j)] + e[(0, j)];
    }
    let mut buf = vec![T::zero(); k];
    for t in 1..t_len {
        for j in 0..k {
            for (i, b) in buf.iter_mut().enumerate() {
                *b = alpha[(t - 1, i)] + trans[(i, j)];
            }
            alpha[(t, j)] = log_sum_exp(&buf) + e[(t, j)];
        }
    }
    alpha
}

/// `beta[t, k]`: log-sum of all suffixes after tag `k` at `t`, STOP included.
fn backward_table<T: Scalar>(e: &Matrix<T>, trans: &Matrix<T>) -> Matrix<T> {
    let (t_len, k) = e.shape();
    let mut beta = Matrix::zeros(t_len, k);
    for i in 0..k {
        beta[(t_len - 1, i)] = trans[(i, k + 1)];
    }
    let mut buf = vec![T::zero(); k];
    for t in (0..t_len - 1).rev() {
        for i in 0..k {
            for (j, b) in buf.iter_mut().enumerate() {
                *b = trans[(i, j)] + e[(t + 1, j)] + beta[(t + 1, j)];
            }
            beta[(t, i)] = log_sum_exp(&buf);
        }
    }
    beta
}

fn log_partition_from<T: Scalar>(alpha: &Matrix<T>, trans: &Matrix<T>) -> T {
    let (t_len, k) = alpha.shape();
    let last: Vec<T> = (0..k).map(|j| alpha[(t_len - 1, j)] + trans[(j, k + 1)]).collect();
    log_sum_exp(&last)
}

/// Log of the sum of `exp(score_path)` over every tag sequence.
pub fn crf_log_partition<T: Scalar>(e: &Matrix<T>, trans: &Matrix<T>) -> Result<T> {
    check_shapes(e, trans)?;
    Ok(log_partition_from(&forward_table(e, trans), trans))
}

/// Negative log-likelihood of `gold`.
pub fn crf_nll<T: Scalar>(e: &Matrix<T>, trans: &Matrix<T>, gold: &[usize]) -> Result<T> {
    Ok(crf_log_partition(e, trans)? - score_path(e, trans, gold)?)
}

/// Gradients of the negative log-likelihood: expected minus gold counts.
fn nll_gradients<T: Scalar>(e: &Matrix<T>, trans: &Matrix<T>, gold: &[usize]) -> (Matrix<T>, Matrix<T>) {
    let (t_len, k) = e.shape();
    let alpha = forward_table(e, trans);
    let beta = backward_table(e, trans);
    let log_z = log_partition_from(&alpha, trans);
    let mut ge = Matrix::zeros(t_len, k);
    let mut gt = Matrix::zeros(k + 2, k + 2);
    for t in 0..t_len {
        for j in 0..k {
            ge[(t, j)] = (alpha[(t, j)] + beta[(t, j)] - log_z).exp();
        }
    }
    for j in 0..k {
        gt[(k, j)] = ge[(0, j)];
        gt[(j, k + 1)] = ge[(t_len - 1, j)];
    }
    for t in 0..t_len - 1 {
        for i in 0..k {
            for j in 0..k {
                let lp = alpha[(t, i)] + trans[(i, j)] + e[(t + 1, j)] + beta[(t + 1, j)] - log_z;
                gt[(i, j)] += lp.exp();
            }
        }
    }
    let one = T::one();
    for (t, &g) in gold.iter().enumerate() {
        ge[(t, g)] -= one;
    }
    gt[(k, gold[0])] -= one;
    for w in gold.windows(2) {
        gt[(w[0], w[1])] -= one;
    }
    gt[(gold[t_len - 1], k + 1)] -= one;
    (ge, gt)
}

struct CrfNll {
    gold: Vec<usize>,
}

impl<T: Scalar> CustomOp<T> for CrfNll {
    fn name(&self) -> &'static str {
        "crf_nll"
    }

    fn backward(&self, inputs: &[&Matrix<T>], grad_out: &Matrix<T>) -> Vec<Matrix<T>> {
        let (mut ge, mut gt) = nll_gradients(inputs[0], inputs[1], &self.gold);
        let g = grad_out.item();
        ge.scale_assign(g);
        gt.scale_assign(g);
        vec![ge, gt]
    }
}

/// Records the negative log-likelihood of `gold` on the tape (`1 × 1`).
pub fn crf_nll_on_tape<T: Scalar>(tape: &mut Tape<T>, e: Var, trans: Var, gold: &[usize]) -> Result<Var> {
    let value = crf_nll(tape.value(e), tape.value(trans), gold)?;
    Ok(tape.custom(
        &[e, trans],
        Matrix::scalar(value),
        Box::new(CrfNll { gold: gold.to_vec() }),
    ))
}

/// Highest-scoring tag sequence and its score. Among equal-scoring sequences
/// the lexicographically smallest is returned.
pub fn viterbi<T: Scalar>(e: &Matrix<T>, trans: &Matrix<T>) -> Result<(Vec<usize>, T)> {
    let (t_len, k) = check_shapes(e, trans)?;
    // best[t][i]: best score of everything after position t given tag i at t.
    let mut best = Matrix::zeros(t_len, k);
    for i in 0..k {
        best[(t_len - 1, i)] = trans[(i, k + 1)];
    }
    for t in (0..t_len - 1).rev() {
        for i in 0..k {
            let mut m = T::neg_infinity();
            for j in 0..k {
                m = m.max((trans[(i, j)] + e[(t + 1, j)]) + best[(t + 1, j)]);
            }
            best[(t, i)] = m;
        }
    }
    let pick = |cands: &mut dyn Iterator<Item = (usize, T)>| {
        let mut arg = (0, T::neg_infinity());
        for (j, s) in cands {
            if s > arg.1 {
                arg = (j, s);
            }
        }
        arg
    };
    let (first, score) = pick(&mut (0..k).map(|j| (j, (trans[(k, j)] + e[(0, j)]) + best[(0, j)])));
    let mut tags = vec![first];
    for t in 0..t_len - 1 {
        let i = tags[t];
        let (next, _) = pick(&mut (0..k).map(|j| (j, (trans[(i, j)] + e[(t + 1, j)]) + best[(t + 1, j)])));
        tags.push(next);
    }
    Ok((tags, score))
}

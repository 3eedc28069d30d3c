use crate::error::{Error, Result};
use crate::numerics::{lstm_step_projected, matmul, LstmCellParams, LstmIds, Matrix, ParamId, ParamSet, Tape, Var};
use crate::scalar::Scalar;

use super::crf::crf_nll_on_tape;
use super::TaggerModel;

fn check_input<T: Scalar>(m: &TaggerModel<T>, x: &Matrix<T>) -> Result<()> {
    if x.cols() != m.input_dim() {
        return Err(Error::Model(format!(
            "token vectors have width {}, model expects {}",
            x.cols(),
            m.input_dim()
        )));
    }
    if x.rows() == 0 {
        return Err(Error::Model("cannot tag an empty sentence".into()));
    }
    Ok(())
}

/// Hidden states of `p` over the rows of `xs` (already reprojected), in the
/// given position order; row `t` of the result belongs to position `order[t]`.
fn run_lstm<T: Scalar>(p: &LstmCellParams<T>, xs: &Matrix<T>, reverse: bool) -> Result<Matrix<T>> {
    let xw = matmul(xs, &p.w.transpose())?;
    let n = xs.rows();
    let mut out = Matrix::zeros(n, p.hidden_dim);
    let mut h = vec![T::zero(); p.hidden_dim];
    let mut c = vec![T::zero(); p.hidden_dim];
    for step in 0..n {
        let t = if reverse { n - 1 - step } else { step };
        p.step_projected(xw.row(t), &mut h, &mut c);
        out.row_mut(t).copy_from_slice(&h);
    }
    Ok(out)
}

pub(super) fn emissions<T: Scalar>(m: &TaggerModel<T>, x: &Matrix<T>) -> Result<Matrix<T>> {
    check_input(m, x)?;
    let xr = match &m.reproj {
        Some((w, b)) => {
            let mut xr = matmul(x, &w.transpose())?;
            for t in 0..xr.rows() {
                for (v, &bias) in xr.row_mut(t).iter_mut().zip(b.as_slice()) {
                    *v += bias;
                }
            }
            xr
        }
        None => x.clone(),
    };
    let hf = run_lstm(&m.fwd, &xr, false)?;
    let hb = run_lstm(&m.bwd, &xr, true)?;
    let (n, k, w) = (x.rows(), m.num_tags(), m.hidden_dim());
    let mut e = Matrix::zeros(n, k);
    for t in 0..n {
        for j in 0..k {
            let row = m.emit.row(j);
            let mut acc = m.emit_bias[(j, 0)];
            for (&a, &b) in row[..w].iter().zip(hf.row(t)) {
                acc += a * b;
            }
            for (&a, &b) in row[w..].iter().zip(hb.row(t)) {
                acc += a * b;
            }
            e[(t, j)] = acc;
        }
    }
    Ok(e)
}

/// Ids of a tagger's trainable parameters inside a [`ParamSet`].
#[derive(Debug, Clone, Copy)]
pub(super) struct TaggerIds {
    reproj: Option<(ParamId, ParamId)>,
    fwd: LstmIds,
    bwd: LstmIds,
    emit: ParamId,
    emit_bias: ParamId,
    pub trans: ParamId,
}

/// Parameter handles bound to one tape.
pub(super) struct BoundTagger {
    reproj: Option<(Var, Var)>,
    fwd: crate::numerics::LstmVars,
    bwd: crate::numerics::LstmVars,
    emit: Var,
    emit_bias: Var,
    trans: Var,
}

impl TaggerIds {
    pub fn register<T: Scalar>(m: &TaggerModel<T>, ps: &mut ParamSet<T>) -> Self {
        TaggerIds {
            reproj: m
                .reproj
                .as_ref()
                .map(|(w, b)| (ps.add("reproj.w", w.clone()), ps.add("reproj.b", b.clone()))),
            fwd: LstmIds::register(ps, "fwd", &m.fwd),
            bwd: LstmIds::register(ps, "bwd", &m.bwd),
            emit: ps.add("emit", m.emit.clone()),
            emit_bias: ps.add("emit.b", m.emit_bias.clone()),
            trans: ps.add("trans", m.trans.clone()),
        }
    }

    pub fn write_back<T: Scalar>(&self, m: &mut TaggerModel<T>, ps: &ParamSet<T>) {
        if let (Some((w, b)), Some(reproj)) = (self.reproj, m.reproj.as_mut()) {
            *reproj = (ps.value(w).clone(), ps.value(b).clone());
        }
        m.fwd = self.fwd.extract(ps);
        m.bwd = self.bwd.extract(ps);
        m.emit = ps.value(self.emit).clone();
        m.emit_bias = ps.value(self.emit_bias).clone();
        m.trans = ps.value(self.trans).clone();
    }

    pub fn bind<T: Scalar>(&self, tape: &mut Tape<T>, ps: &ParamSet<T>) -> BoundTagger {
        BoundTagger {
            reproj: self.reproj.map(|(w, b)| (tape.param(ps, w), tape.param(ps, b))),
            fwd: self.fwd.bind(tape, ps),
            bwd: self.bwd.bind(tape, ps),
            emit: tape.param(ps, self.emit),
            emit_bias: tape.param(ps, self.emit_bias),
            trans: tape.param(ps, self.trans),
        }
    }
}

impl BoundTagger {
    /// Emission scores on the tape, `tokens × K`.
    pub fn emissions<T: Scalar>(&self, tape: &mut Tape<T>, x: &Matrix<T>) -> Result<Var> {
        let n = x.rows();
        let xs = tape.constant(x.transpose());
        let xr = match self.reproj {
            Some((w, b)) => {
                let p = tape.matmul(w, xs)?;
                tape.add_bias(p, b)?
            }
            None => xs,
        };
        let mut states = Vec::with_capacity(2);
        for (p, reverse) in [(&self.fwd, false), (&self.bwd, true)] {
            let xw = tape.matmul(p.w, xr)?;
            let zeros = Matrix::zeros(p.hidden_dim, 1);
            let mut h = tape.constant(zeros.clone());
            let mut c = tape.constant(zeros);
            let mut hs = vec![h; n];
            for step in 0..n {
                let t = if reverse { n - 1 - step } else { step };
                let col = tape.slice_cols(xw, t, t + 1)?;
                (h, c) = lstm_step_projected(tape, p, col, h, c)?;
                hs[t] = h;
            }
            states.push(tape.concat_cols(&hs)?);
        }
        let hcat = tape.concat_rows(&states)?;
        let e = tape.matmul(self.emit, hcat)?;
        let e = tape.add_bias(e, self.emit_bias)?;
        Ok(tape.transpose(e))
    }

    pub fn sentence_nll<T: Scalar>(&self, tape: &mut Tape<T>, x: &Matrix<T>, gold: &[usize]) -> Result<Var> {
        let e = self.emissions(tape, x)?;
        crf_nll_on_tape(tape, e, self.trans, gold)
    }
}

/// Full tagger loss on a tape, exposed for gradient checking.
pub struct TaggerLoss {
    ids: TaggerIds,
}

impl TaggerLoss {
    pub fn new<T: Scalar>(m: &TaggerModel<T>) -> (ParamSet<T>, Self) {
        let mut ps = ParamSet::new();
        let ids = TaggerIds::register(m, &mut ps);
        (ps, TaggerLoss { ids })
    }

    /// Negative log-likelihood of `gold` for token vectors `x` (`tokens × D`).
    pub fn record<T: Scalar>(&self, tape: &mut Tape<T>, ps: &ParamSet<T>, x: &Matrix<T>, gold: &[usize]) -> Result<Var> {
        if x.rows() != gold.len() {
            return Err(Error::dim("tagger_loss", (x.rows(), 1), (gold.len(), 1)));
        }
        self.ids.bind(tape, ps).sentence_nll(tape, x, gold)
    }

    /// Copies parameter values from `ps` into `m`.
    pub fn write_back<T: Scalar>(&self, m: &mut TaggerModel<T>, ps: &ParamSet<T>) {
        self.ids.write_back(m, ps);
    }
}

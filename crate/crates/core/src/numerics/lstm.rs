//! LSTM cell with fused gate matrices in the fixed order `[input, forget, cell, output]`.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::activation::sigmoid;
use super::rng::{fan_in_uniform, Rng};
use super::tape::{CustomOp, ParamId, ParamSet, Tape, Var};
use super::Matrix;

#[derive(Debug, Clone, PartialEq)]
pub struct LstmCellParams<T: Scalar> {
    pub input_dim: usize,
    pub hidden_dim: usize,
    /// `4H × input_dim`
    pub w: Matrix<T>,
    /// `4H × H`
    pub u: Matrix<T>,
    /// `4H × 1`
    pub b: Matrix<T>,
}

impl<T: Scalar> LstmCellParams<T> {
    /// Fan-in uniform weights, zero bias except the forget slice which starts at 1.
    pub fn init(input_dim: usize, hidden_dim: usize, rng: &mut Rng) -> Self {
        let w = fan_in_uniform(rng, 4 * hidden_dim, input_dim);
        let u = fan_in_uniform(rng, 4 * hidden_dim, hidden_dim);
        let mut b = Matrix::zeros(4 * hidden_dim, 1);
        for r in hidden_dim..2 * hidden_dim {
            b[(r, 0)] = T::one();
        }
        LstmCellParams {
            input_dim,
            hidden_dim,
            w,
            u,
            b,
        }
    }

    pub fn zeros(input_dim: usize, hidden_dim: usize) -> Self {
        LstmCellParams {
            input_dim,
            hidden_dim,
            w: Matrix::zeros(4 * hidden_dim, input_dim),
            u: Matrix::zeros(4 * hidden_dim, hidden_dim),
            b: Matrix::zeros(4 * hidden_dim, 1),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let g = 4 * self.hidden_dim;
        let checks = [
            ("lstm.w", self.w.shape(), (g, self.input_dim)),
            ("lstm.u", self.u.shape(), (g, self.hidden_dim)),
            ("lstm.b", self.b.shape(), (g, 1)),
        ];
        for (op, got, want) in checks {
            if got != want {
                return Err(Error::dim(op, want, got));
            }
        }
        Ok(())
    }

    /// Input projections `W·x` for a whole sequence given as columns of `xs`.
    pub fn project_inputs(&self, xs: &Matrix<T>) -> Result<Matrix<T>> {
        super::matmul(&self.w, xs)
    }

    /// One step from an already projected input column (`W·x`, length 4H).
    /// Updates `h` and `c` in place.
    pub fn step_projected(&self, xw: &[T], h: &mut [T], c: &mut [T]) {
        let hd = self.hidden_dim;
        let mut z: Vec<T> = xw.to_vec();
        for (r, zr) in z.iter_mut().enumerate() {
            let urow = self.u.row(r);
            let mut acc = self.b[(r, 0)];
            for (&uv, &hv) in urow.iter().zip(h.iter()) {
                acc += uv * hv;
            }
            *zr += acc;
        }
        for k in 0..hd {
            let i = sigmoid(z[k]);
            let f = sigmoid(z[hd + k]);
            let g = z[2 * hd + k].tanh();
            let o = sigmoid(z[3 * hd + k]);
            c[k] = f * c[k] + i * g;
            h[k] = o * c[k].tanh();
        }
    }
}

/// One LSTM step on plain vectors: returns `(h', c')`.
pub fn lstm_cell<T: Scalar>(
    x: &[T],
    h: &[T],
    c: &[T],
    p: &LstmCellParams<T>,
) -> Result<(Vec<T>, Vec<T>)> {
    if x.len() != p.input_dim {
        return Err(Error::dim("lstm_cell.x", (p.input_dim, 1), (x.len(), 1)));
    }
    if h.len() != p.hidden_dim || c.len() != p.hidden_dim {
        return Err(Error::dim("lstm_cell.state", (p.hidden_dim, 1), (h.len(), c.len())));
    }
    let xw = super::matmul(&p.w, &Matrix::column(x))?;
    let (mut h, mut c) = (h.to_vec(), c.to_vec());
    p.step_projected(xw.as_slice(), &mut h, &mut c);
    Ok((h, c))
}

/// Parameter ids of an LSTM cell registered in a [`ParamSet`].
#[derive(Debug, Clone, Copy)]
pub struct LstmIds {
    pub w: ParamId,
    pub u: ParamId,
    pub b: ParamId,
    pub hidden_dim: usize,
}

impl LstmIds {
    pub fn register<T: Scalar>(params: &mut ParamSet<T>, prefix: &str, p: &LstmCellParams<T>) -> Self {
        LstmIds {
            w: params.add(format!("{prefix}.w"), p.w.clone()),
            u: params.add(format!("{prefix}.u"), p.u.clone()),
            b: params.add(format!("{prefix}.b"), p.b.clone()),
            hidden_dim: p.hidden_dim,
        }
    }

    pub fn extract<T: Scalar>(&self, params: &ParamSet<T>) -> LstmCellParams<T> {
        let w = params.value(self.w).clone();
        LstmCellParams {
            input_dim: w.cols(),
            hidden_dim: self.hidden_dim,
            w,
            u: params.value(self.u).clone(),
            b: params.value(self.b).clone(),
        }
    }

    pub fn bind<T: Scalar>(&self, tape: &mut Tape<T>, params: &ParamSet<T>) -> LstmVars {
        LstmVars {
            w: tape.param(params, self.w),
            u: tape.param(params, self.u),
            b: tape.param(params, self.b),
            hidden_dim: self.hidden_dim,
        }
    }
}

/// LSTM parameters recorded on a tape.
#[derive(Debug, Clone, Copy)]
pub struct LstmVars {
    pub w: Var,
    pub u: Var,
    pub b: Var,
    pub hidden_dim: usize,
}

/// Gate nonlinearities and state update fused into one tape node.
/// Inputs: pre-activations `z` (4H × B) and previous cell `c` (H × B).
/// Output: `[h'; c']` stacked (2H × B).
struct LstmGates;

fn gates_forward<T: Scalar>(z: &Matrix<T>, c: &Matrix<T>) -> Matrix<T> {
    let (hd, b) = c.shape();
    let mut out = Matrix::zeros(2 * hd, b);
    for k in 0..hd {
        for j in 0..b {
            let i = sigmoid(z[(k, j)]);
            let f = sigmoid(z[(hd + k, j)]);
            let g = z[(2 * hd + k, j)].tanh();
            let o = sigmoid(z[(3 * hd + k, j)]);
            let cn = f * c[(k, j)] + i * g;
            out[(k, j)] = o * cn.tanh();
            out[(hd + k, j)] = cn;
        }
    }
    out
}

impl<T: Scalar> CustomOp<T> for LstmGates {
    fn name(&self) -> &'static str {
        "lstm_gates"
    }

    fn backward(&self, inputs: &[&Matrix<T>], grad_out: &Matrix<T>) -> Vec<Matrix<T>> {
        let (z, c) = (inputs[0], inputs[1]);
        let (hd, b) = c.shape();
        let one = T::one();
        let mut gz = Matrix::zeros(4 * hd, b);
        let mut gc = Matrix::zeros(hd, b);
        for k in 0..hd {
            for j in 0..b {
                let i = sigmoid(z[(k, j)]);
                let f = sigmoid(z[(hd + k, j)]);
                let g = z[(2 * hd + k, j)].tanh();
                let o = sigmoid(z[(3 * hd + k, j)]);
                let cn = f * c[(k, j)] + i * g;
                let tc = cn.tanh();
                let gh = grad_out[(k, j)];
                let dc = grad_out[(hd + k, j)] + gh * o * (one - tc * tc);
                gz[(k, j)] = dc * g * i * (one - i);
                gz[(hd + k, j)] = dc * c[(k, j)] * f * (one - f);
                gz[(2 * hd + k, j)] = dc * i * (one - g * g);
                gz[(3 * hd + k, j)] = gh * tc * o * (one - o);
                gc[(k, j)] = dc * f;
            }
        }
        vec![gz, gc]
    }
}

/// One batched step on the tape from projected inputs `xw = W·x` (4H × B).
/// Returns `(h', c')`, each H × B.
pub fn lstm_step_projected<T: Scalar>(
    tape: &mut Tape<T>,
    p: &LstmVars,
    xw: Var,
    h: Var,
    c: Var,
) -> Result<(Var, Var)> {
    let uh = tape.matmul(p.u, h)?;
    let z = tape.add(xw, uh)?;
    let z = tape.add_bias(z, p.b)?;
    let hd = p.hidden_dim;
    if tape.value(c).rows() != hd || tape.value(z).cols() != tape.value(c).cols() {
        return Err(Error::dim("lstm_step", tape.value(z).shape(), tape.value(c).shape()));
    }
    let value = gates_forward(tape.value(z), tape.value(c));
    let hc = tape.custom(&[z, c], value, Box::new(LstmGates));
    let h_next = tape.slice_rows(hc, 0, hd)?;
    let c_next = tape.slice_rows(hc, hd, 2 * hd)?;
    Ok((h_next, c_next))
}

/// One batched step on the tape from raw inputs `x` (input_dim × B).
pub fn lstm_step<T: Scalar>(
    tape: &mut Tape<T>,
    p: &LstmVars,
    x: Var,
    h: Var,
    c: Var,
) -> Result<(Var, Var)> {
    let xw = tape.matmul(p.w, x)?;
    lstm_step_projected(tape, p, xw, h, c)
}

use std::collections::HashMap;

use super::{stable_sigmoid, ParamId, ParameterStore, Tensor};
use crate::error::{MkrError, Result};
use crate::scalar::Scalar;

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Clone, Debug)]
enum Op<T> {
    Constant,
    Param(ParamId),
    MatMul(usize, usize),
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    /// `[rows×n] + [n]`, the bias broadcast over rows.
    AddRow(usize, usize),
    /// `[rows×n] ⊙ [rows×1]`, one scale per row.
    MulCol(usize, usize),
    Scale(usize, T),
    Sigmoid(usize),
    Relu(usize),
    Ln(usize),
    Clamp(usize, T, T),
    Sum(usize),
    Mean(usize),
    RowSum(usize),
    SquaredNorm(usize),
    Gather(usize, Vec<usize>),
    ConcatCols(usize, usize),
    ConcatRows(usize, usize),
    Transpose(usize),
    Reshape(usize),
}

impl<T> Op<T> {
    fn parents(&self) -> Vec<usize> {
        use Op::*;
        match self {
            Constant | Param(_) => vec![],
            MatMul(a, b) | Add(a, b) | Sub(a, b) | Mul(a, b) | AddRow(a, b) | MulCol(a, b)
            | ConcatCols(a, b) | ConcatRows(a, b) => vec![*a, *b],
            Scale(a, _) | Sigmoid(a) | Relu(a) | Ln(a) | Clamp(a, _, _) | Sum(a) | Mean(a)
            | RowSum(a) | SquaredNorm(a) | Gather(a, _) | Transpose(a) | Reshape(a) => vec![*a],
        }
    }
}

#[derive(Clone, Debug)]
struct Node<T> {
    value: Tensor<T>,
    op: Op<T>,
}

/// Record of the primitive operations of one forward pass.
///
/// Every operation evaluates eagerly and keeps what its adjoint needs;
/// [`Tape::backward`] replays the adjoints in reverse order.
#[derive(Debug)]
pub struct Tape<T> {
    nodes: Vec<Node<T>>,
    param_vars: HashMap<ParamId, Var>,
}

impl<T: Scalar> Default for Tape<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar> Tape<T> {
    pub fn new() -> Self {
        Tape {
            nodes: Vec::new(),
            param_vars: HashMap::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor<T>, op: Op<T>) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    pub fn constant(&mut self, value: Tensor<T>) -> Var {
        self.push(value, Op::Constant)
    }

    /// Brings a stored parameter onto the tape. Repeated calls within one
    /// pass return the same variable.
    pub fn param(&mut self, store: &ParameterStore<T>, id: ParamId) -> Var {
        if let Some(&v) = self.param_vars.get(&id) {
            return v;
        }
        let v = self.push(store.value(id).clone(), Op::Param(id));
        self.param_vars.insert(id, v);
        v
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.value(a).matmul(self.value(b))?;
        Ok(self.push(out, Op::MatMul(a.0, b.0)))
    }

    fn broadcast_check(&self, op: &'static str, a: Var, b: Var) -> Result<()> {
        let (x, y) = (self.value(a), self.value(b));
        if x.shape() == y.shape() || x.is_scalar() || y.is_scalar() {
            Ok(())
        } else {
            Err(MkrError::dim(op, x.shape(), y.shape()))
        }
    }

    fn binary(&mut self, a: Var, b: Var, f: impl Fn(T, T) -> T) -> Tensor<T> {
        let (x, y) = (self.value(a), self.value(b));
        if x.shape() == y.shape() {
            x.zip_map(y, f)
        } else if y.is_scalar() {
            let s = y.item();
            x.map(|v| f(v, s))
        } else {
            let s = x.item();
            y.map(|v| f(s, v))
        }
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.broadcast_check("add", a, b)?;
        let out = self.binary(a, b, |x, y| x + y);
        Ok(self.push(out, Op::Add(a.0, b.0)))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.broadcast_check("sub", a, b)?;
        let out = self.binary(a, b, |x, y| x - y);
        Ok(self.push(out, Op::Sub(a.0, b.0)))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.broadcast_check("mul", a, b)?;
        let out = self.binary(a, b, |x, y| x * y);
        Ok(self.push(out, Op::Mul(a.0, b.0)))
    }

    pub fn add_row(&mut self, a: Var, bias: Var) -> Result<Var> {
        let (x, b) = (self.value(a), self.value(bias));
        let (_, cols) = x.dims2();
        if b.len() != cols {
            return Err(MkrError::dim("add_row", x.shape(), b.shape()));
        }
        let mut out = x.clone();
        let c = out.cols();
        for (i, v) in out.data_mut().iter_mut().enumerate() {
            *v += b.data()[i % c];
        }
        Ok(self.push(out, Op::AddRow(a.0, bias.0)))
    }

    pub fn mul_col(&mut self, a: Var, scale: Var) -> Result<Var> {
        let (x, s) = (self.value(a), self.value(scale));
        let (rows, cols) = x.dims2();
        if s.len() != rows {
            return Err(MkrError::dim("mul_col", x.shape(), s.shape()));
        }
        let mut out = x.clone();
        for (i, v) in out.data_mut().iter_mut().enumerate() {
            *v *= s.data()[i / cols];
        }
        Ok(self.push(out, Op::MulCol(a.0, scale.0)))
    }

    /// Multiplies by a fixed constant. Scaling by exactly zero yields a
    /// constant, so nothing upstream is reachable through the result.
    pub fn scale(&mut self, a: Var, c: T) -> Var {
        if c == T::zero() {
            let z = Tensor::zeros(self.shape(a));
            return self.constant(z);
        }
        let out = self.value(a).map(|x| x * c);
        self.push(out, Op::Scale(a.0, c))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let out = self.value(a).map(stable_sigmoid);
        self.push(out, Op::Sigmoid(a.0))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let out = self.value(a).map(|x| x.max(T::zero()));
        self.push(out, Op::Relu(a.0))
    }

    pub fn ln(&mut self, a: Var) -> Var {
        let out = self.value(a).map(|x| x.ln());
        self.push(out, Op::Ln(a.0))
    }

    pub fn clamp(&mut self, a: Var, lo: T, hi: T) -> Var {
        let out = self.value(a).map(|x| x.max(lo).min(hi));
        self.push(out, Op::Clamp(a.0, lo, hi))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let out = Tensor::scalar(self.value(a).sum());
        self.push(out, Op::Sum(a.0))
    }

    pub fn mean(&mut self, a: Var) -> Var {
        let x = self.value(a);
        let out = Tensor::scalar(x.sum() / T::from_usize_lossy(x.len()));
        self.push(out, Op::Mean(a.0))
    }

    /// Sum along each row: `[rows×n] → [rows×1]`.
    pub fn row_sum(&mut self, a: Var) -> Var {
        let x = self.value(a);
        let rows = x.rows();
        let data = (0..rows).map(|i| x.row(i).iter().copied().sum()).collect();
        let out = Tensor::new(vec![rows, 1], data).expect("row_sum shape");
        self.push(out, Op::RowSum(a.0))
    }

    pub fn squared_norm(&mut self, a: Var) -> Var {
        let out = Tensor::scalar(self.value(a).squared_norm());
        self.push(out, Op::SquaredNorm(a.0))
    }

    /// Selects rows of a 2-D value (embedding lookup when `a` is a table).
    pub fn gather(&mut self, a: Var, rows: &[usize]) -> Result<Var> {
        let x = self.value(a);
        let (n, cols) = x.dims2();
        if rows.is_empty() {
            return Err(MkrError::contract("gather with no row indices"));
        }
        if let Some(&bad) = rows.iter().find(|&&r| r >= n) {
            return Err(MkrError::contract(format!(
                "gather row {bad} out of range for {n} rows"
            )));
        }
        let mut data = Vec::with_capacity(rows.len() * cols);
        for &r in rows {
            data.extend_from_slice(x.row(r));
        }
        let out = Tensor::new(vec![rows.len(), cols], data)?;
        Ok(self.push(out, Op::Gather(a.0, rows.to_vec())))
    }

    pub fn concat_cols(&mut self, a: Var, b: Var) -> Result<Var> {
        let (x, y) = (self.value(a), self.value(b));
        let ((r1, c1), (r2, c2)) = (x.dims2(), y.dims2());
        if r1 != r2 {
            return Err(MkrError::dim("concat_cols", x.shape(), y.shape()));
        }
        let mut data = Vec::with_capacity(r1 * (c1 + c2));
        for i in 0..r1 {
            data.extend_from_slice(x.row(i));
            data.extend_from_slice(y.row(i));
        }
        let out = Tensor::new(vec![r1, c1 + c2], data)?;
        Ok(self.push(out, Op::ConcatCols(a.0, b.0)))
    }

    pub fn concat_rows(&mut self, a: Var, b: Var) -> Result<Var> {
        let (x, y) = (self.value(a), self.value(b));
        let ((r1, c1), (r2, c2)) = (x.dims2(), y.dims2());
        if c1 != c2 {
            return Err(MkrError::dim("concat_rows", x.shape(), y.shape()));
        }
        let mut data = x.data().to_vec();
        data.extend_from_slice(y.data());
        let out = Tensor::new(vec![r1 + r2, c1], data)?;
        Ok(self.push(out, Op::ConcatRows(a.0, b.0)))
    }

    pub fn transpose(&mut self, a: Var) -> Var {
        let out = self.value(a).transpose();
        self.push(out, Op::Transpose(a.0))
    }

    pub fn reshape(&mut self, a: Var, shape: &[usize]) -> Result<Var> {
        let out = self.value(a).reshape(shape)?;
        Ok(self.push(out, Op::Reshape(a.0)))
    }

    /// Parameters on some path to `loss`, in ascending id order.
    pub fn params_reaching(&self, loss: Var) -> Vec<ParamId> {
        let mut seen = vec![false; loss.0 + 1];
        seen[loss.0] = true;
        let mut out = Vec::new();
        for i in (0..=loss.0).rev() {
            if !seen[i] {
                continue;
            }
            if let Op::Param(id) = self.nodes[i].op {
                out.push(id);
            }
            for p in self.nodes[i].op.parents() {
                seen[p] = true;
            }
        }
        out.sort();
        out
    }

    /// Reverse pass from a scalar `loss`. All gradients in `store` are reset
    /// first, so parameters off the path end up with zero gradient. Returns
    /// the parameters that received a gradient.
    pub fn backward(&self, loss: Var, store: &mut ParameterStore<T>) -> Result<Vec<ParamId>> {
        if !self.value(loss).is_scalar() {
            return Err(MkrError::contract(format!(
                "backward needs a scalar loss, got shape {:?}",
                self.shape(loss)
            )));
        }
        store.zero_grads();
        let mut adj: Vec<Option<Tensor<T>>> = vec![None; loss.0 + 1];
        adj[loss.0] = Some(Tensor::ones(self.shape(loss)));
        let mut reached = Vec::new();

        for i in (0..=loss.0).rev() {
            let Some(g) = adj[i].take() else { continue };
            let node = &self.nodes[i];
            match &node.op {
                Op::Constant => {}
                Op::Param(id) => {
                    store.grad_mut(*id).add_assign(&g);
                    reached.push(*id);
                }
                Op::MatMul(a, b) => {
                    let ga = g.matmul_t(&self.nodes[*b].value)?;
                    let gb = self.nodes[*a].value.t_matmul(&g)?;
                    accumulate(&mut adj, *a, ga);
                    accumulate(&mut adj, *b, gb);
                }
                Op::Add(a, b) => {
                    let ga = self.reduce_broadcast(*a, g.clone());
                    let gb = self.reduce_broadcast(*b, g);
                    accumulate(&mut adj, *a, ga);
                    accumulate(&mut adj, *b, gb);
                }
                Op::Sub(a, b) => {
                    let ga = self.reduce_broadcast(*a, g.clone());
                    let gb = self.reduce_broadcast(*b, g.map(|x| -x));
                    accumulate(&mut adj, *a, ga);
                    accumulate(&mut adj, *b, gb);
                }
                Op::Mul(a, b) => {
                    let (x, y) = (&self.nodes[*a].value, &self.nodes[*b].value);
                    let ga = self.reduce_broadcast(*a, mul_broadcast(&g, y));
                    let gb = self.reduce_broadcast(*b, mul_broadcast(&g, x));
                    accumulate(&mut adj, *a, ga);
                    accumulate(&mut adj, *b, gb);
                }
                Op::AddRow(a, bias) => {
                    let b_shape = self.nodes[*bias].value.shape().to_vec();
                    let cols = g.cols();
                    let mut gb = Tensor::zeros(&b_shape);
                    for (k, &v) in g.data().iter().enumerate() {
                        gb.data_mut()[k % cols] += v;
                    }
                    accumulate(&mut adj, *bias, gb);
                    accumulate(&mut adj, *a, g);
                }
                Op::MulCol(a, s) => {
                    let x = &self.nodes[*a].value;
                    let sv = &self.nodes[*s].value;
                    let cols = g.cols();
                    let mut ga = g.clone();
                    let mut gs = Tensor::zeros(sv.shape());
                    for (k, gv) in ga.data_mut().iter_mut().enumerate() {
                        let r = k / cols;
                        gs.data_mut()[r] += *gv * x.data()[k];
                        *gv *= sv.data()[r];
                    }
                    accumulate(&mut adj, *a, ga);
                    accumulate(&mut adj, *s, gs);
                }
                Op::Scale(a, c) => {
                    let c = *c;
                    accumulate(&mut adj, *a, g.map(|x| x * c));
                }
                Op::Sigmoid(a) => {
                    let ga = g.zip_map(&node.value, |gv, s| gv * s * (T::one() - s));
                    accumulate(&mut adj, *a, ga);
                }
                Op::Relu(a) => {
                    let x = &self.nodes[*a].value;
                    let ga = g.zip_map(x, |gv, xv| if xv > T::zero() { gv } else { T::zero() });
                    accumulate(&mut adj, *a, ga);
                }
                Op::Ln(a) => {
                    let x = &self.nodes[*a].value;
                    accumulate(&mut adj, *a, g.zip_map(x, |gv, xv| gv / xv));
                }
                Op::Clamp(a, lo, hi) => {
                    let (lo, hi) = (*lo, *hi);
                    let x = &self.nodes[*a].value;
                    let ga = g.zip_map(x, |gv, xv| {
                        if xv >= lo && xv <= hi {
                            gv
                        } else {
                            T::zero()
                        }
                    });
                    accumulate(&mut adj, *a, ga);
                }
                Op::Sum(a) => {
                    let s = g.item();
                    accumulate(&mut adj, *a, Tensor::filled(self.shape(Var(*a)), s));
                }
                Op::Mean(a) => {
                    let shape = self.shape(Var(*a));
                    let n = T::from_usize_lossy(shape.iter().product());
                    accumulate(&mut adj, *a, Tensor::filled(shape, g.item() / n));
                }
                Op::RowSum(a) => {
                    let x = &self.nodes[*a].value;
                    let cols = x.cols();
                    let mut ga = Tensor::zeros(x.shape());
                    for (k, v) in ga.data_mut().iter_mut().enumerate() {
                        *v = g.data()[k / cols];
                    }
                    accumulate(&mut adj, *a, ga);
                }
                Op::SquaredNorm(a) => {
                    let s = g.item() * T::lit(2.0);
                    let ga = self.nodes[*a].value.map(|x| x * s);
                    accumulate(&mut adj, *a, ga);
                }
                Op::Gather(a, rows) => {
                    let mut ga = Tensor::zeros(self.shape(Var(*a)));
                    for (k, &r) in rows.iter().enumerate() {
                        let src = g.row(k);
                        for (d, &s) in ga.row_mut(r).iter_mut().zip(src) {
                            *d += s;
                        }
                    }
                    accumulate(&mut adj, *a, ga);
                }
                Op::ConcatCols(a, b) => {
                    let c1 = self.nodes[*a].value.cols();
                    let c2 = self.nodes[*b].value.cols();
                    let rows = g.rows();
                    let mut da = Vec::with_capacity(rows * c1);
                    let mut db = Vec::with_capacity(rows * c2);
                    for i in 0..rows {
                        let r = g.row(i);
                        da.extend_from_slice(&r[..c1]);
                        db.extend_from_slice(&r[c1..]);
                    }
                    let ga = Tensor::new(self.shape(Var(*a)).to_vec(), da)?;
                    let gb = Tensor::new(self.shape(Var(*b)).to_vec(), db)?;
                    accumulate(&mut adj, *a, ga);
                    accumulate(&mut adj, *b, gb);
                }
                Op::ConcatRows(a, b) => {
                    let n1 = self.nodes[*a].value.len();
                    let ga = Tensor::new(self.shape(Var(*a)).to_vec(), g.data()[..n1].to_vec())?;
                    let gb = Tensor::new(self.shape(Var(*b)).to_vec(), g.data()[n1..].to_vec())?;
                    accumulate(&mut adj, *a, ga);
                    accumulate(&mut adj, *b, gb);
                }
                Op::Transpose(a) => {
                    let ga = g.transpose().reshape(self.shape(Var(*a)))?;
                    accumulate(&mut adj, *a, ga);
                }
                Op::Reshape(a) => {
                    let ga = g.reshape(self.shape(Var(*a)))?;
                    accumulate(&mut adj, *a, ga);
                }
            }
        }
        reached.sort();
        Ok(reached)
    }

    /// Collapses a gradient back onto a scalar-broadcast operand.
    fn reduce_broadcast(&self, operand: usize, g: Tensor<T>) -> Tensor<T> {
        let shape = self.nodes[operand].value.shape();
        if shape == g.shape() {
            g
        } else {
            Tensor::filled(shape, g.sum())
        }
    }
}

fn mul_broadcast<T: Scalar>(g: &Tensor<T>, other: &Tensor<T>) -> Tensor<T> {
    if other.shape() == g.shape() {
        g.zip_map(other, |a, b| a * b)
    } else {
        let s = other.item();
        g.map(|a| a * s)
    }
}

fn accumulate<T: Scalar>(adj: &mut [Option<Tensor<T>>], at: usize, g: Tensor<T>) {
    match &mut adj[at] {
        Some(existing) => existing.add_assign(&g),
        slot @ None => *slot = Some(g),
    }
}

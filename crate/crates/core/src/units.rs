//! Layers of the network: the cross&compress unit, a fully connected layer
//! and the two restricted units used by the DCN and cross-stitch variants.
//!
//! Every `apply` works on a batch: `v` and `e` are `[rows×d]` and row `i`
//! of each output depends only on row `i` of the inputs.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{ParamId, ParamKind, ParameterStore, Tape, Tensor, Var};
use crate::error::{MkrError, Result};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Sigmoid,
    Identity,
}

impl Activation {
    pub fn apply<T: Scalar>(self, tape: &mut Tape<T>, x: Var) -> Var {
        match self {
            Activation::Relu => tape.relu(x),
            Activation::Sigmoid => tape.sigmoid(x),
            Activation::Identity => x,
        }
    }
}

pub(crate) fn uniform_tensor<T: Scalar, R: Rng>(shape: &[usize], limit: f64, rng: &mut R) -> Tensor<T> {
    let n: usize = shape.iter().product();
    let data = (0..n)
        .map(|_| T::lit(rng.random_range(-limit..=limit)))
        .collect();
    Tensor::new(shape.to_vec(), data).expect("shape matches data")
}

/// Initialization range for unit weight vectors and embedding rows.
pub fn vector_init_limit(d: usize) -> f64 {
    1.0 / (d as f64).sqrt()
}

/// `σ(W x + b)` applied to every row of the input.
#[derive(Clone, Debug)]
pub struct DenseLayer {
    pub weight: ParamId,
    pub bias: ParamId,
    pub activation: Activation,
    pub d_in: usize,
    pub d_out: usize,
}

impl DenseLayer {
    pub fn register<T: Scalar, R: Rng>(
        store: &mut ParameterStore<T>,
        prefix: &str,
        d_in: usize,
        d_out: usize,
        activation: Activation,
        rng: &mut R,
    ) -> Result<Self> {
        let limit = (6.0 / (d_in + d_out) as f64).sqrt();
        let weight = store.register(
            format!("{prefix}.weight"),
            ParamKind::Weight,
            uniform_tensor(&[d_out, d_in], limit, rng),
        )?;
        let bias = store.register(format!("{prefix}.bias"), ParamKind::Bias, Tensor::zeros(&[d_out]))?;
        Ok(DenseLayer {
            weight,
            bias,
            activation,
            d_in,
            d_out,
        })
    }

    pub fn forward<T: Scalar>(&self, tape: &mut Tape<T>, store: &ParameterStore<T>, x: Var) -> Result<Var> {
        if tape.value(x).cols() != self.d_in {
            return Err(MkrError::dim("dense", tape.shape(x), &[self.d_out, self.d_in]));
        }
        let w = tape.param(store, self.weight);
        let wt = tape.transpose(w);
        let b = tape.param(store, self.bias);
        let z = tape.matmul(x, wt)?;
        let z = tape.add_row(z, b)?;
        Ok(self.activation.apply(tape, z))
    }
}

/// Applies layers in sequence.
pub fn forward_stack<T: Scalar>(
    layers: &[DenseLayer],
    tape: &mut Tape<T>,
    store: &ParameterStore<T>,
    mut x: Var,
) -> Result<Var> {
    for layer in layers {
        x = layer.forward(tape, store, x)?;
    }
    Ok(x)
}

/// Cross feature matrix `v eᵀ` of two length-d vectors.
pub fn cross<T: Scalar>(tape: &mut Tape<T>, v: Var, e: Var) -> Result<Var> {
    let (dv, de) = (tape.value(v).len(), tape.value(e).len());
    if dv != de {
        return Err(MkrError::dim("cross", tape.shape(v), tape.shape(e)));
    }
    let col = tape.reshape(v, &[dv, 1])?;
    let row = tape.reshape(e, &[1, de])?;
    tape.matmul(col, row)
}

/// The four weight vectors and two biases of one cross&compress layer.
#[derive(Clone, Debug)]
pub struct CrossCompressUnit {
    pub w_vv: ParamId,
    pub w_ev: ParamId,
    pub w_ve: ParamId,
    pub w_ee: ParamId,
    pub b_v: ParamId,
    pub b_e: ParamId,
    pub dim: usize,
}

impl CrossCompressUnit {
    pub fn register<T: Scalar, R: Rng>(
        store: &mut ParameterStore<T>,
        prefix: &str,
        dim: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let limit = vector_init_limit(dim);
        let mut w = |name: &str, rng: &mut R| {
            store.register(
                format!("{prefix}.{name}"),
                ParamKind::Weight,
                uniform_tensor(&[dim], limit, rng),
            )
        };
        let w_vv = w("w_vv", rng)?;
        let w_ev = w("w_ev", rng)?;
        let w_ve = w("w_ve", rng)?;
        let w_ee = w("w_ee", rng)?;
        let b_v = store.register(format!("{prefix}.b_v"), ParamKind::Bias, Tensor::zeros(&[dim]))?;
        let b_e = store.register(format!("{prefix}.b_e"), ParamKind::Bias, Tensor::zeros(&[dim]))?;
        Ok(CrossCompressUnit {
            w_vv,
            w_ev,
            w_ve,
            w_ee,
            b_v,
            b_e,
            dim,
        })
    }

    pub fn params(&self) -> [ParamId; 6] {
        [self.w_vv, self.w_ev, self.w_ve, self.w_ee, self.b_v, self.b_e]
    }

    fn column<T: Scalar>(&self, tape: &mut Tape<T>, store: &ParameterStore<T>, id: ParamId) -> Result<Var> {
        let p = tape.param(store, id);
        tape.reshape(p, &[self.dim, 1])
    }

    /// Projects a `d×d` cross matrix back to the two feature spaces:
    /// `v' = C w_vv + Cᵀ w_ev + b_v`, `e' = C w_ve + Cᵀ w_ee + b_e`.
    pub fn compress<T: Scalar>(
        &self,
        tape: &mut Tape<T>,
        store: &ParameterStore<T>,
        c: Var,
    ) -> Result<(Var, Var)> {
        if tape.shape(c) != [self.dim, self.dim] {
            return Err(MkrError::dim("compress", tape.shape(c), &[self.dim, self.dim]));
        }
        let ct = tape.transpose(c);
        let side = |tape: &mut Tape<T>, wa: ParamId, wb: ParamId, b: ParamId| -> Result<Var> {
            let wa = self.column(tape, store, wa)?;
            let wb = self.column(tape, store, wb)?;
            let x = tape.matmul(c, wa)?;
            let y = tape.matmul(ct, wb)?;
            let s = tape.add(x, y)?;
            let s = tape.reshape(s, &[self.dim])?;
            let b = tape.param(store, b);
            tape.add(s, b)
        };
        let v = side(tape, self.w_vv, self.w_ev, self.b_v)?;
        let e = side(tape, self.w_ve, self.w_ee, self.b_e)?;
        Ok((v, e))
    }

    /// Cross then compress for a single pair of length-d vectors, through
    /// the explicit `d×d` matrix.
    pub fn apply_matrix_form<T: Scalar>(
        &self,
        tape: &mut Tape<T>,
        store: &ParameterStore<T>,
        v: Var,
        e: Var,
    ) -> Result<(Var, Var)> {
        let c = cross(tape, v, e)?;
        self.compress(tape, store, c)
    }

    /// Batched cross&compress in factored form:
    /// `v' = v (eᵀ w_vv) + e (vᵀ w_ev) + b_v`, likewise for `e'`.
    pub fn apply<T: Scalar>(
        &self,
        tape: &mut Tape<T>,
        store: &ParameterStore<T>,
        v: Var,
        e: Var,
    ) -> Result<(Var, Var)> {
        check_pair(tape, v, e, self.dim)?;
        let w_vv = self.column(tape, store, self.w_vv)?;
        let w_ev = self.column(tape, store, self.w_ev)?;
        let w_ve = self.column(tape, store, self.w_ve)?;
        let w_ee = self.column(tape, store, self.w_ee)?;
        let b_v = tape.param(store, self.b_v);
        let b_e = tape.param(store, self.b_e);

        let e_vv = tape.matmul(e, w_vv)?;
        let v_ev = tape.matmul(v, w_ev)?;
        let e_ve = tape.matmul(e, w_ve)?;
        let v_ee = tape.matmul(v, w_ee)?;

        let a = tape.mul_col(v, e_vv)?;
        let b = tape.mul_col(e, v_ev)?;
        let v_next = tape.add(a, b)?;
        let v_next = tape.add_row(v_next, b_v)?;

        let a = tape.mul_col(v, e_ve)?;
        let b = tape.mul_col(e, v_ee)?;
        let e_next = tape.add(a, b)?;
        let e_next = tape.add_row(e_next, b_e)?;
        Ok((v_next, e_next))
    }
}

fn check_pair<T: Scalar>(tape: &Tape<T>, v: Var, e: Var, dim: usize) -> Result<()> {
    let (sv, se) = (tape.value(v), tape.value(e));
    if sv.shape() != se.shape() || sv.cols() != dim {
        return Err(MkrError::dim("unit input", sv.shape(), se.shape()));
    }
    Ok(())
}

/// Cross layer with a residual connection and fixed layer-0 anchors:
/// `v' = e₀ (vᵀ w_ev) + v + b_v`, `e' = v₀ (eᵀ w_ve) + e + b_e`.
#[derive(Clone, Debug)]
pub struct DcnLayer {
    pub w_ev: ParamId,
    pub w_ve: ParamId,
    pub b_v: ParamId,
    pub b_e: ParamId,
    pub dim: usize,
}

impl DcnLayer {
    pub fn register<T: Scalar, R: Rng>(
        store: &mut ParameterStore<T>,
        prefix: &str,
        dim: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let limit = vector_init_limit(dim);
        let w_ev = store.register(
            format!("{prefix}.w_ev"),
            ParamKind::Weight,
            uniform_tensor(&[dim], limit, rng),
        )?;
        let w_ve = store.register(
            format!("{prefix}.w_ve"),
            ParamKind::Weight,
            uniform_tensor(&[dim], limit, rng),
        )?;
        let b_v = store.register(format!("{prefix}.b_v"), ParamKind::Bias, Tensor::zeros(&[dim]))?;
        let b_e = store.register(format!("{prefix}.b_e"), ParamKind::Bias, Tensor::zeros(&[dim]))?;
        Ok(DcnLayer {
            w_ev,
            w_ve,
            b_v,
            b_e,
            dim,
        })
    }

    /// `anchors` are the `(v₀, e₀)` inputs of the first layer in the same
    /// forward pass.
    pub fn apply<T: Scalar>(
        &self,
        tape: &mut Tape<T>,
        store: &ParameterStore<T>,
        v: Var,
        e: Var,
        anchors: Option<(Var, Var)>,
    ) -> Result<(Var, Var)> {
        let (v0, e0) =
            anchors.ok_or_else(|| MkrError::contract("DCN layer applied without layer-0 anchors"))?;
        check_pair(tape, v, e, self.dim)?;
        check_pair(tape, v0, e0, self.dim)?;
        let w_ev = tape.param(store, self.w_ev);
        let w_ev = tape.reshape(w_ev, &[self.dim, 1])?;
        let w_ve = tape.param(store, self.w_ve);
        let w_ve = tape.reshape(w_ve, &[self.dim, 1])?;
        let b_v = tape.param(store, self.b_v);
        let b_e = tape.param(store, self.b_e);

        let s = tape.matmul(v, w_ev)?;
        let x = tape.mul_col(e0, s)?;
        let x = tape.add(x, v)?;
        let v_next = tape.add_row(x, b_v)?;

        let s = tape.matmul(e, w_ve)?;
        let y = tape.mul_col(v0, s)?;
        let y = tape.add(y, e)?;
        let e_next = tape.add_row(y, b_e)?;
        Ok((v_next, e_next))
    }
}

/// Cross-stitch unit: a learned 2×2 scalar mixing of the two pathways.
#[derive(Clone, Debug)]
pub struct StitchUnit {
    pub alpha_aa: ParamId,
    pub alpha_ab: ParamId,
    pub alpha_ba: ParamId,
    pub alpha_bb: ParamId,
    pub dim: usize,
}

impl StitchUnit {
    /// Starts at the identity mixing.
    pub fn register<T: Scalar>(store: &mut ParameterStore<T>, prefix: &str, dim: usize) -> Result<Self> {
        let mut s = |name: &str, v: f64| {
            store.register(
                format!("{prefix}.{name}"),
                ParamKind::Weight,
                Tensor::scalar(T::lit(v)),
            )
        };
        Ok(StitchUnit {
            alpha_aa: s("alpha_aa", 1.0)?,
            alpha_ab: s("alpha_ab", 0.0)?,
            alpha_ba: s("alpha_ba", 0.0)?,
            alpha_bb: s("alpha_bb", 1.0)?,
            dim,
        })
    }

    pub fn apply<T: Scalar>(
        &self,
        tape: &mut Tape<T>,
        store: &ParameterStore<T>,
        v: Var,
        e: Var,
    ) -> Result<(Var, Var)> {
        check_pair(tape, v, e, self.dim)?;
        let mix = |tape: &mut Tape<T>, a: ParamId, b: ParamId| -> Result<Var> {
            let a = tape.param(store, a);
            let b = tape.param(store, b);
            let x = tape.mul(v, a)?;
            let y = tape.mul(e, b)?;
            tape.add(x, y)
        };
        let v_next = mix(tape, self.alpha_aa, self.alpha_ab)?;
        let e_next = mix(tape, self.alpha_ba, self.alpha_bb)?;
        Ok((v_next, e_next))
    }
}

/// One layer of the shared item/entity pathway.
#[derive(Clone, Debug)]
pub enum SharedUnit {
    CrossCompress(CrossCompressUnit),
    Dcn(DcnLayer),
    Stitch(StitchUnit),
}

impl SharedUnit {
    pub fn apply<T: Scalar>(
        &self,
        tape: &mut Tape<T>,
        store: &ParameterStore<T>,
        v: Var,
        e: Var,
        anchors: (Var, Var),
    ) -> Result<(Var, Var)> {
        match self {
            SharedUnit::CrossCompress(u) => u.apply(tape, store, v, e),
            SharedUnit::Dcn(u) => u.apply(tape, store, v, e, Some(anchors)),
            SharedUnit::Stitch(u) => u.apply(tape, store, v, e),
        }
    }
}

/// Runs `v, e` through a stack of shared units.
pub fn apply_shared<T: Scalar>(
    units: &[SharedUnit],
    tape: &mut Tape<T>,
    store: &ParameterStore<T>,
    v: Var,
    e: Var,
) -> Result<(Var, Var)> {
    let anchors = (v, e);
    let (mut v, mut e) = (v, e);
    for unit in units {
        (v, e) = unit.apply(tape, store, v, e, anchors)?;
    }
    Ok((v, e))
}

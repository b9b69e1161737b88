//! Column Network recurrence over the real-node columns.
//!
//! One parameter set is shared by every node and every step. Each step reads
//! only the previous step's states, so all columns advance synchronously.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Graph, NeighborIndex};
use crate::numerics::{ParamId, ParamStore, Tape, Var};

/// Nonlinearity `g` used for candidate states.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    #[default]
    Relu,
    Tanh,
    /// No nonlinearity; only useful for tests and linear probes.
    Identity,
}

impl Activation {
    pub fn apply(self, tape: &mut Tape, x: Var) -> Var {
        match self {
            Activation::Relu => tape.relu(x),
            Activation::Tanh => tape.tanh(x),
            Activation::Identity => x,
        }
    }
}

/// Parameter ids of one affine map `W h + sum_p U_p c_p + V h0 + b`.
#[derive(Clone, Debug, PartialEq)]
pub struct AffineIds {
    pub w: ParamId,
    pub u: Vec<ParamId>,
    pub v: Option<ParamId>,
    pub b: ParamId,
}

impl AffineIds {
    pub(crate) fn bind(&self, tape: &mut Tape, store: &ParamStore) -> BoundAffine {
        BoundAffine {
            w: tape.param_from(store, self.w),
            u: self
                .u
                .iter()
                .map(|&id| tape.param_from(store, id))
                .collect(),
            v: self.v.map(|id| tape.param_from(store, id)),
            b: tape.param_from(store, self.b),
        }
    }
}

/// Ids of the node-column parameters inside a [`ParamStore`].
#[derive(Clone, Debug, PartialEq)]
pub struct ColumnParams {
    pub proj_w: ParamId,
    pub proj_b: ParamId,
    pub candidate: AffineIds,
    pub gate: AffineIds,
    pub reset: Option<AffineIds>,
}

impl ColumnParams {
    /// Records every column parameter on `tape` exactly once.
    pub fn bind(&self, tape: &mut Tape, store: &ParamStore) -> BoundColumn {
        BoundColumn {
            proj_w: tape.param_from(store, self.proj_w),
            proj_b: tape.param_from(store, self.proj_b),
            candidate: self.candidate.bind(tape, store),
            gate: self.gate.bind(tape, store),
            reset: self.reset.as_ref().map(|r| r.bind(tape, store)),
        }
    }
}

/// Affine map whose parameters live on a tape.
#[derive(Clone, Debug)]
pub struct BoundAffine {
    pub w: Var,
    pub u: Vec<Var>,
    pub v: Option<Var>,
    pub b: Var,
}

impl BoundAffine {
    /// `W h + sum_p U_p c_p [+ V h0] + b`. The `V` term is used only when
    /// both the matrix and `h0` are present.
    pub fn apply(&self, tape: &mut Tape, h: Var, contexts: &[Var], h0: Option<Var>) -> Result<Var> {
        if contexts.len() != self.u.len() {
            return Err(Error::shape(
                "affine",
                format!(
                    "{} contexts for {} edge types",
                    contexts.len(),
                    self.u.len()
                ),
            ));
        }
        let mut terms = Vec::with_capacity(self.u.len() + 3);
        terms.push(tape.matvec(self.w, h)?);
        for (&u, &c) in self.u.iter().zip(contexts) {
            terms.push(tape.matvec(u, c)?);
        }
        if let (Some(v), Some(h0)) = (self.v, h0) {
            terms.push(tape.matvec(v, h0)?);
        }
        terms.push(self.b);
        tape.sum(&terms)
    }
}

/// Column parameters recorded on a tape.
#[derive(Clone, Debug)]
pub struct BoundColumn {
    pub proj_w: Var,
    pub proj_b: Var,
    pub candidate: BoundAffine,
    pub gate: BoundAffine,
    pub reset: Option<BoundAffine>,
}

/// Node-column states at step `t` (1-based).
#[derive(Clone, Debug)]
pub struct ColumnState {
    pub h: Vec<Var>,
    pub t: usize,
}

/// `h_i = P x_i + b_P` for every node; `t = 1`.
pub fn init_states(tape: &mut Tape, g: &Graph, params: &BoundColumn) -> Result<ColumnState> {
    let (_, d_x) = tape.shape(params.proj_w);
    if g.attr_dim() != d_x {
        return Err(Error::shape(
            "init_states",
            format!(
                "graph attributes have length {}, projection expects {d_x}",
                g.attr_dim()
            ),
        ));
    }
    let h = g
        .nodes()
        .iter()
        .map(|x| {
            let x = tape.input_vec(x);
            let px = tape.matvec(params.proj_w, x)?;
            tape.add(px, params.proj_b)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ColumnState { h, t: 1 })
}

/// Mean of the previous states of `N_p(i)`, or `zero` when the neighborhood
/// is empty.
pub fn context(
    tape: &mut Tape,
    i: usize,
    p: usize,
    state: &ColumnState,
    index: &NeighborIndex,
    zero: Var,
) -> Result<Var> {
    let nbrs = index.neighbors(i, p);
    if nbrs.is_empty() {
        return Ok(zero);
    }
    let items: Vec<Var> = nbrs.iter().map(|&j| state.h[j]).collect();
    tape.mean(&items)
}

/// Contexts of node `i` for every edge type, in type order.
pub fn contexts(
    tape: &mut Tape,
    i: usize,
    state: &ColumnState,
    index: &NeighborIndex,
    zero: Var,
) -> Result<Vec<Var>> {
    (0..index.n_edge_types())
        .map(|p| context(tape, i, p, state, index, zero))
        .collect()
}

/// Candidate state `g(W (r * h) + sum_p U_p c_p [+ V h0] + b)`; without a
/// reset gate `r` is implicitly all ones.
pub fn candidate(
    tape: &mut Tape,
    h_prev: Var,
    contexts: &[Var],
    h0: Option<Var>,
    affine: &BoundAffine,
    reset: Option<Var>,
    activation: Activation,
) -> Result<Var> {
    let h_in = match reset {
        Some(r) => tape.mul(r, h_prev)?,
        None => h_prev,
    };
    let pre = affine.apply(tape, h_in, contexts, h0)?;
    Ok(activation.apply(tape, pre))
}

/// Sigmoid gate parameterized like the candidate.
pub fn gate(
    tape: &mut Tape,
    h_prev: Var,
    contexts: &[Var],
    h0: Option<Var>,
    affine: &BoundAffine,
) -> Result<Var> {
    let pre = affine.apply(tape, h_prev, contexts, h0)?;
    Ok(tape.sigmoid(pre))
}

/// `(1 - alpha) * h_prev + alpha * h_cand`.
pub fn highway_step(tape: &mut Tape, h_prev: Var, h_cand: Var, alpha: Var) -> Result<Var> {
    let keep = tape.one_minus(alpha);
    let kept = tape.mul(keep, h_prev)?;
    let moved = tape.mul(alpha, h_cand)?;
    tape.add(kept, moved)
}

/// Full gated update of one node column from its previous state and contexts,
/// optionally reading the virtual state `h0`.
pub fn node_update(
    tape: &mut Tape,
    h_prev: Var,
    contexts: &[Var],
    h0: Option<Var>,
    params: &BoundColumn,
    activation: Activation,
) -> Result<Var> {
    let reset = match &params.reset {
        Some(r) => Some(gate(tape, h_prev, contexts, h0, r)?),
        None => None,
    };
    let cand = candidate(
        tape,
        h_prev,
        contexts,
        h0,
        &params.candidate,
        reset,
        activation,
    )?;
    let alpha = gate(tape, h_prev, contexts, h0, &params.gate)?;
    highway_step(tape, h_prev, cand, alpha)
}

/// Advances every node column by one step, reading only `state` (and `h0`,
/// the virtual state of the same step, when present).
pub fn cln_step(
    tape: &mut Tape,
    state: &ColumnState,
    index: &NeighborIndex,
    params: &BoundColumn,
    h0: Option<Var>,
    activation: Activation,
) -> Result<ColumnState> {
    let (d_h, _) = tape.shape(state.h[0]);
    let zero = tape.input_vec(&vec![0.0; d_h]);
    let mut next = Vec::with_capacity(state.h.len());
    for (i, &h_prev) in state.h.iter().enumerate() {
        let ctx = contexts(tape, i, state, index, zero)?;
        next.push(node_update(tape, h_prev, &ctx, h0, params, activation)?);
    }
    Ok(ColumnState {
        h: next,
        t: state.t + 1,
    })
}

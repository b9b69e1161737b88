//! The Virtual Column Network: node columns plus one virtual column that
//! reads the mean of all node states and feeds its own state back into every
//! node. The graph score is a classifier head over the final virtual state
//! (or over the mean of final node states, for the pooling baseline).

mod checkpoint;

use rand::Rng;
use serde::{Deserialize, Serialize};

pub use checkpoint::{
    load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, CHECKPOINT_MAGIC,
};

use crate::column::{
    self, cln_step, contexts, highway_step, init_states, Activation, AffineIds, BoundAffine,
    BoundColumn, ColumnParams, ColumnState,
};
use crate::error::{Error, Result};
use crate::graph::{augment, build_neighbor_index, AugmentedGraph, Graph};
use crate::numerics::{glorot_uniform, Gradients, ParamId, ParamStore, Tape, Tensor, Var};

/// How the fixed-size graph vector is read off the final states.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Readout {
    /// Final virtual-column state.
    #[default]
    Virtual,
    /// Mean of the final node-column states.
    Mean,
}

impl std::str::FromStr for Readout {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "virtual" | "virtual-node" => Ok(Readout::Virtual),
            "mean" | "mean-pool" => Ok(Readout::Mean),
            other => Err(Error::Unknown {
                kind: "readout",
                name: other.into(),
            }),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    /// Node attribute width.
    pub d_x: usize,
    /// Graph descriptor width (input of the virtual column).
    pub d_g: usize,
    pub n_edge_types: usize,
    /// Node column width.
    pub d_h: usize,
    /// Virtual column width.
    pub d_v: usize,
    /// Column height `T`; `T - 1` update steps are run.
    pub steps: usize,
    pub use_virtual: bool,
    pub readout: Readout,
    /// Highway-gate the virtual column like the node columns.
    pub virtual_gate: bool,
    /// GRU-style reset gate inside node candidates.
    pub reset_gate: bool,
    /// Optional hidden relu layer in the classifier head.
    pub head_hidden: Option<usize>,
    pub activation: Activation,
}

impl ModelConfig {
    /// Defaults for a dataset: 10 update steps, 16-wide columns, virtual readout.
    pub fn for_data(d_x: usize, d_g: usize, n_edge_types: usize) -> Self {
        ModelConfig {
            d_x,
            d_g,
            n_edge_types,
            d_h: 16,
            d_v: 16,
            steps: 11,
            use_virtual: true,
            readout: Readout::Virtual,
            virtual_gate: true,
            reset_gate: false,
            head_hidden: None,
            activation: Activation::Relu,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.steps == 0 {
            return bad("steps must be at least 1");
        }
        if self.d_x == 0 || self.d_h == 0 {
            return bad("d_x and d_h must be positive");
        }
        if self.n_edge_types == 0 {
            return bad("at least one edge type is required");
        }
        if self.use_virtual && self.d_v == 0 {
            return bad("d_v must be positive when the virtual column is enabled");
        }
        if self.readout == Readout::Virtual && !self.use_virtual {
            return bad("virtual readout requires the virtual column");
        }
        if self.head_hidden == Some(0) {
            return bad("head hidden width must be positive");
        }
        Ok(())
    }

    fn readout_dim(&self) -> usize {
        match self.readout {
            Readout::Virtual => self.d_v,
            Readout::Mean => self.d_h,
        }
    }
}

/// Ids of the virtual-column parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct VirtualParams {
    pub proj_w: ParamId,
    pub proj_b: ParamId,
    /// `W0 h0 + U0 mean(h) + b`
    pub candidate: AffineIds,
    pub gate: Option<AffineIds>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct HeadParams {
    pub hidden: Option<(ParamId, ParamId)>,
    pub out_w: ParamId,
    pub out_b: ParamId,
}

/// Where each parameter of the network lives in the store.
#[derive(Clone, Debug, PartialEq)]
pub struct VcnParams {
    pub column: ColumnParams,
    pub virtual_col: Option<VirtualParams>,
    pub head: HeadParams,
}

/// Name and shape of every parameter implied by a config, in store order.
pub fn param_layout(cfg: &ModelConfig) -> Vec<(String, usize, usize)> {
    let mut out = Vec::new();
    let (dh, dv) = (cfg.d_h, cfg.d_v);
    out.push(("node.proj.w".into(), dh, cfg.d_x));
    out.push(("node.proj.b".into(), dh, 1));
    let node_affine = |out: &mut Vec<(String, usize, usize)>, name: &str| {
        out.push((format!("node.{name}.w"), dh, dh));
        for p in 0..cfg.n_edge_types {
            out.push((format!("node.{name}.u{p}"), dh, dh));
        }
        if cfg.use_virtual {
            out.push((format!("node.{name}.v"), dh, dv));
        }
        out.push((format!("node.{name}.b"), dh, 1));
    };
    node_affine(&mut out, "cand");
    node_affine(&mut out, "gate");
    if cfg.reset_gate {
        node_affine(&mut out, "reset");
    }
    if cfg.use_virtual {
        out.push(("virt.proj.w".into(), dv, cfg.d_g));
        out.push(("virt.proj.b".into(), dv, 1));
        let virt_affine = |out: &mut Vec<(String, usize, usize)>, name: &str| {
            out.push((format!("virt.{name}.w"), dv, dv));
            out.push((format!("virt.{name}.u"), dv, dh));
            out.push((format!("virt.{name}.b"), dv, 1));
        };
        virt_affine(&mut out, "cand");
        if cfg.virtual_gate {
            virt_affine(&mut out, "gate");
        }
    }
    let mut d_in = cfg.readout_dim();
    if let Some(k) = cfg.head_hidden {
        out.push(("head.hidden.w".into(), k, d_in));
        out.push(("head.hidden.b".into(), k, 1));
        d_in = k;
    }
    out.push(("head.out.w".into(), 1, d_in));
    out.push(("head.out.b".into(), 1, 1));
    out
}

impl VcnParams {
    /// Resolves ids by name, checking every shape against `cfg`.
    pub fn resolve(cfg: &ModelConfig, store: &ParamStore) -> Result<Self> {
        let layout = param_layout(cfg);
        if layout.len() != store.len() {
            return Err(Error::Checkpoint(format!(
                "expected {} parameters, found {}",
                layout.len(),
                store.len()
            )));
        }
        for (name, r, c) in &layout {
            let t = store
                .by_name(name)
                .ok_or_else(|| Error::Checkpoint(format!("missing parameter `{name}`")))?;
            if t.shape() != (*r, *c) {
                return Err(Error::Checkpoint(format!(
                    "parameter `{name}` has shape {:?}, expected ({r}, {c})",
                    t.shape()
                )));
            }
        }
        let id = |n: &str| store.id(n).expect("checked above");
        let node_affine = |name: &str| AffineIds {
            w: id(&format!("node.{name}.w")),
            u: (0..cfg.n_edge_types)
                .map(|p| id(&format!("node.{name}.u{p}")))
                .collect(),
            v: cfg.use_virtual.then(|| id(&format!("node.{name}.v"))),
            b: id(&format!("node.{name}.b")),
        };
        let virt_affine = |name: &str| AffineIds {
            w: id(&format!("virt.{name}.w")),
            u: vec![id(&format!("virt.{name}.u"))],
            v: None,
            b: id(&format!("virt.{name}.b")),
        };
        Ok(VcnParams {
            column: ColumnParams {
                proj_w: id("node.proj.w"),
                proj_b: id("node.proj.b"),
                candidate: node_affine("cand"),
                gate: node_affine("gate"),
                reset: cfg.reset_gate.then(|| node_affine("reset")),
            },
            virtual_col: cfg.use_virtual.then(|| VirtualParams {
                proj_w: id("virt.proj.w"),
                proj_b: id("virt.proj.b"),
                candidate: virt_affine("cand"),
                gate: cfg.virtual_gate.then(|| virt_affine("gate")),
            }),
            head: HeadParams {
                hidden: cfg
                    .head_hidden
                    .map(|_| (id("head.hidden.w"), id("head.hidden.b"))),
                out_w: id("head.out.w"),
                out_b: id("head.out.b"),
            },
        })
    }
}

/// Virtual-column parameters recorded on a tape.
#[derive(Clone, Debug)]
pub struct BoundVirtual {
    pub proj_w: Var,
    pub proj_b: Var,
    pub candidate: BoundAffine,
    pub gate: Option<BoundAffine>,
}

#[derive(Clone, Debug)]
pub struct BoundHead {
    pub hidden: Option<(Var, Var)>,
    pub out_w: Var,
    pub out_b: Var,
}

/// Every network parameter recorded once on a tape.
#[derive(Clone, Debug)]
pub struct BoundVcn {
    pub column: BoundColumn,
    pub virtual_col: Option<BoundVirtual>,
    pub head: BoundHead,
}

impl VcnParams {
    pub fn bind(&self, tape: &mut Tape, store: &ParamStore) -> BoundVcn {
        let column = self.column.bind(tape, store);
        let virtual_col = self.virtual_col.as_ref().map(|v| BoundVirtual {
            proj_w: tape.param_from(store, v.proj_w),
            proj_b: tape.param_from(store, v.proj_b),
            candidate: v.candidate.bind(tape, store),
            gate: v.gate.as_ref().map(|g| g.bind(tape, store)),
        });
        let head = BoundHead {
            hidden: self
                .head
                .hidden
                .map(|(w, b)| (tape.param_from(store, w), tape.param_from(store, b))),
            out_w: tape.param_from(store, self.head.out_w),
            out_b: tape.param_from(store, self.head.out_b),
        };
        BoundVcn {
            column,
            virtual_col,
            head,
        }
    }
}

/// One update of the virtual column from its previous state and the previous
/// node states: `g(W0 h0 + U0 mean_i h_i + b)`, highway-gated when the gate
/// parameters are present.
pub fn virtual_step(
    tape: &mut Tape,
    h0_prev: Var,
    node_states: &[Var],
    params: &BoundVirtual,
    activation: Activation,
) -> Result<Var> {
    let pooled = tape.mean(node_states)?;
    let pre = params.candidate.apply(tape, h0_prev, &[pooled], None)?;
    let cand = activation.apply(tape, pre);
    match &params.gate {
        Some(g) => {
            let alpha = column::gate(tape, h0_prev, &[pooled], None, g)?;
            highway_step(tape, h0_prev, cand, alpha)
        }
        None => Ok(cand),
    }
}

/// Node-column update that also reads the previous virtual state through `V`.
pub fn node_step_with_virtual(
    tape: &mut Tape,
    h_prev: Var,
    h0_prev: Var,
    contexts: &[Var],
    params: &BoundColumn,
    activation: Activation,
) -> Result<Var> {
    column::node_update(tape, h_prev, contexts, Some(h0_prev), params, activation)
}

/// Graph vector read off the final states.
pub fn readout(
    tape: &mut Tape,
    node_states: &[Var],
    h0_final: Option<Var>,
    mode: Readout,
) -> Result<Var> {
    match mode {
        Readout::Virtual => {
            h0_final.ok_or_else(|| Error::Config("virtual readout without a virtual column".into()))
        }
        Readout::Mean => tape.mean(node_states),
    }
}

/// Whether dropout is active for a forward pass.
pub enum Mode<'r> {
    Eval,
    Train {
        dropout: f64,
        rng: &'r mut dyn rand::RngCore,
    },
}

/// Result of one forward pass: the tape plus handles to the interesting values.
#[derive(Debug)]
pub struct Forward {
    pub tape: Tape,
    pub score: Var,
    pub node_states: Vec<Var>,
    pub virtual_state: Option<Var>,
    pub readout: Var,
}

impl Forward {
    pub fn score(&self) -> f64 {
        self.tape.scalar(self.score)
    }

    /// Appends the BCE loss and returns it with all parameter gradients.
    pub fn loss_and_grads(mut self, label: bool, store: &ParamStore) -> Result<(f64, Gradients)> {
        let loss = self.tape.bce(self.score, label)?;
        let grads = self.tape.backward(loss, store)?;
        Ok((self.tape.scalar(loss), grads))
    }
}

fn dropout_mask(len: usize, rate: f64, rng: &mut dyn rand::RngCore) -> Vec<f64> {
    let keep = 1.0 / (1.0 - rate);
    (0..len)
        .map(|_| if rng.gen::<f64>() < rate { 0.0 } else { keep })
        .collect()
}

/// Configured network together with its parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct Vcn {
    config: ModelConfig,
    store: ParamStore,
    params: VcnParams,
}

impl Vcn {
    /// Glorot-uniform weights, zero biases.
    pub fn new<R: Rng + ?Sized>(config: ModelConfig, rng: &mut R) -> Result<Self> {
        config.validate()?;
        let mut store = ParamStore::new();
        for (name, r, c) in param_layout(&config) {
            let t = if c == 1 && name.ends_with(".b") {
                Tensor::zeros(r, c)
            } else {
                glorot_uniform(r, c, rng)
            };
            store.insert(name, t)?;
        }
        let params = VcnParams::resolve(&config, &store)?;
        Ok(Vcn {
            config,
            store,
            params,
        })
    }

    pub fn from_parts(config: ModelConfig, store: ParamStore) -> Result<Self> {
        config.validate()?;
        let params = VcnParams::resolve(&config, &store)?;
        Ok(Vcn {
            config,
            store,
            params,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn store(&self) -> &ParamStore {
        &self.store
    }

    pub fn store_mut(&mut self) -> &mut ParamStore {
        &mut self.store
    }

    pub fn params(&self) -> &VcnParams {
        &self.params
    }

    pub fn param_mut(&mut self, name: &str) -> Option<&mut Tensor> {
        self.store.by_name_mut(name)
    }

    pub fn augment<'g>(&self, g: &'g Graph) -> Result<AugmentedGraph<'g>> {
        augment(g, self.config.d_g)
    }

    /// Checks that a graph fits this network's input shapes.
    pub fn check_graph(&self, g: &Graph) -> Result<()> {
        if g.attr_dim() != self.config.d_x {
            return Err(Error::Dataset(format!(
                "node attributes have width {}, model expects {}",
                g.attr_dim(),
                self.config.d_x
            )));
        }
        if g.n_edge_types() != self.config.n_edge_types {
            return Err(Error::Dataset(format!(
                "graph declares {} edge types, model expects {}",
                g.n_edge_types(),
                self.config.n_edge_types
            )));
        }
        Ok(())
    }

    /// Projects inputs, runs `T - 1` synchronous joint steps, reads out and
    /// scores. Dropout (inverted) hits the projected inputs and the readout
    /// vector, and only in [`Mode::Train`].
    pub fn forward(&self, g: &AugmentedGraph<'_>, mut mode: Mode<'_>) -> Result<Forward> {
        let cfg = &self.config;
        let base = g.base();
        self.check_graph(base)?;
        let mut tape = Tape::new();
        let bound = self.params.bind(&mut tape, &self.store);
        let index = build_neighbor_index(base);

        let mut dropout = |tape: &mut Tape, v: Var| -> Result<Var> {
            match &mut mode {
                Mode::Train { dropout, rng } if *dropout > 0.0 => {
                    let (r, c) = tape.shape(v);
                    let mask = dropout_mask(r * c, *dropout, &mut **rng);
                    tape.mask(v, mask)
                }
                _ => Ok(v),
            }
        };

        let mut state = init_states(&mut tape, base, &bound.column)?;
        for h in state.h.iter_mut() {
            *h = dropout(&mut tape, *h)?;
        }
        let mut h0 = match &bound.virtual_col {
            Some(v) => {
                let x0 = tape.input_vec(g.virtual_input());
                let p = tape.matvec(v.proj_w, x0)?;
                let h = tape.add(p, v.proj_b)?;
                Some(dropout(&mut tape, h)?)
            }
            None => None,
        };

        for _ in 1..cfg.steps {
            let next_h0 = match (&bound.virtual_col, h0) {
                (Some(v), Some(h0)) => {
                    Some(virtual_step(&mut tape, h0, &state.h, v, cfg.activation)?)
                }
                _ => None,
            };
            state = match h0 {
                Some(h0) => {
                    let zero = tape.input_vec(&vec![0.0; cfg.d_h]);
                    let mut next = Vec::with_capacity(state.h.len());
                    for (i, &h) in state.h.iter().enumerate() {
                        let ctx = contexts(&mut tape, i, &state, &index, zero)?;
                        next.push(node_step_with_virtual(
                            &mut tape,
                            h,
                            h0,
                            &ctx,
                            &bound.column,
                            cfg.activation,
                        )?);
                    }
                    ColumnState {
                        h: next,
                        t: state.t + 1,
                    }
                }
                None => cln_step(
                    &mut tape,
                    &state,
                    &index,
                    &bound.column,
                    None,
                    cfg.activation,
                )?,
            };
            h0 = next_h0;
        }

        let pooled = readout(&mut tape, &state.h, h0, cfg.readout)?;
        let mut z = dropout(&mut tape, pooled)?;
        if let Some((w, b)) = bound.head.hidden {
            let a = tape.matvec(w, z)?;
            let a = tape.add(a, b)?;
            z = tape.relu(a);
        }
        let logit = tape.matvec(bound.head.out_w, z)?;
        let logit = tape.add(logit, bound.head.out_b)?;
        let score = tape.sigmoid(logit);
        tape.check_finite()?;
        Ok(Forward {
            tape,
            score,
            node_states: state.h,
            virtual_state: h0,
            readout: pooled,
        })
    }

    /// Inference score in `(0, 1)`.
    pub fn score(&self, g: &Graph) -> Result<f64> {
        Ok(self.forward(&self.augment(g)?, Mode::Eval)?.score())
    }

    /// Final node-column states (eval mode), one vector per node.
    pub fn node_states(&self, g: &Graph) -> Result<Vec<Vec<f64>>> {
        let f = self.forward(&self.augment(g)?, Mode::Eval)?;
        Ok(f.node_states
            .iter()
            .map(|&v| f.tape.value(v).to_vec())
            .collect())
    }

    /// BCE loss of a labeled graph and its parameter gradients.
    pub fn loss_and_grads(&self, g: &Graph, mode: Mode<'_>) -> Result<(f64, Gradients)> {
        let label = g
            .label()
            .ok_or_else(|| Error::Dataset("graph has no label".into()))?;
        self.forward(&self.augment(g)?, mode)?
            .loss_and_grads(label, &self.store)
    }

    /// BCE loss without gradients (eval mode).
    pub fn loss(&self, g: &Graph) -> Result<f64> {
        let label = g
            .label()
            .ok_or_else(|| Error::Dataset("graph has no label".into()))?;
        Ok(crate::numerics::bce_loss(self.score(g)?, label))
    }
}

//! Analytic gradients against central finite differences.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::column::Activation;
use crate::data::random_graph;
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::model::{Mode, ModelConfig, Readout, Vcn};
use crate::numerics::Gradients;

pub const FD_STEP: f64 = 1e-5;
pub const TOLERANCE: f64 = 1e-4;
/// Denominator floor for gradients that are essentially zero.
pub const REL_FLOOR: f64 = 1e-6;
/// Configurations with a relu pre-activation closer to zero than this are
/// resampled.
pub const KINK_MARGIN: f64 = 1e-3;

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    let scale = analytic.abs().max(numeric.abs()).max(REL_FLOOR);
    (analytic - numeric).abs() / scale
}

/// Central-difference gradient of the eval-mode loss for every parameter.
pub fn numeric_gradients(model: &Vcn, g: &Graph, h: f64) -> Result<Gradients> {
    let mut probe = model.clone();
    let mut grads = model.store().zero_grads();
    let ids: Vec<_> = model.store().iter().map(|(id, _, _)| id).collect();
    for id in ids {
        for k in 0..model.store().get(id).len() {
            let orig = model.store().get(id).data()[k];
            probe.store_mut().get_mut(id).data_mut()[k] = orig + h;
            let up = probe.loss(g)?;
            probe.store_mut().get_mut(id).data_mut()[k] = orig - h;
            let down = probe.loss(g)?;
            probe.store_mut().get_mut(id).data_mut()[k] = orig;
            grads.get_mut(id).data_mut()[k] = (up - down) / (2.0 * h);
        }
    }
    Ok(grads)
}

/// Largest relative error over all parameters and the parameter holding it.
pub fn compare(model: &Vcn, analytic: &Gradients, numeric: &Gradients) -> (f64, String) {
    let mut worst = (0.0, String::new());
    for (id, name, _) in model.store().iter() {
        let a = analytic.get(id).data();
        let n = numeric.get(id).data();
        for (x, y) in a.iter().zip(n) {
            let e = relative_error(*x, *y);
            if e > worst.0 || worst.1.is_empty() {
                worst = (e.max(worst.0), name.to_string());
            }
        }
    }
    worst
}

#[derive(Clone, Debug, Serialize)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub worst_param: String,
    pub graphs: usize,
    pub scalars: usize,
    pub resampled: usize,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.max_rel_error < TOLERANCE
    }
}

/// Random small configuration: 3 to 10 nodes, 1 to 3 edge types, column
/// widths 4 or 8, short columns, and a random choice of the optional parts.
pub fn random_case<R: Rng>(rng: &mut R) -> Result<(Vcn, Graph)> {
    let n = rng.gen_range(3..=10);
    let p = rng.gen_range(1..=3);
    let d_x = rng.gen_range(1..=4);
    let with_attrs = rng.gen_bool(0.5);
    let d_g = if with_attrs {
        rng.gen_range(1..=3)
    } else {
        d_x
    };
    let use_virtual = rng.gen_bool(0.75);
    let readout = if use_virtual && rng.gen_bool(0.5) {
        Readout::Virtual
    } else {
        Readout::Mean
    };
    let cfg = ModelConfig {
        d_h: if rng.gen_bool(0.5) { 4 } else { 8 },
        d_v: if rng.gen_bool(0.5) { 4 } else { 8 },
        steps: rng.gen_range(2..=4),
        use_virtual,
        readout,
        virtual_gate: rng.gen_bool(0.5),
        reset_gate: rng.gen_bool(0.5),
        head_hidden: if rng.gen_bool(0.3) { Some(3) } else { None },
        activation: if rng.gen_bool(0.7) {
            Activation::Relu
        } else {
            Activation::Tanh
        },
        ..ModelConfig::for_data(d_x, d_g, p)
    };
    let edge_prob = rng.gen_range(0.15..0.5);
    let g = random_graph(rng, n, p, d_x, with_attrs.then_some(d_g), edge_prob)?;
    let mut model = Vcn::new(cfg, rng)?;
    // nonzero biases so that every bias gradient path is exercised
    let ids: Vec<_> = model
        .store()
        .iter()
        .filter(|(_, name, _)| name.ends_with(".b"))
        .map(|(id, _, _)| id)
        .collect();
    for id in ids {
        for v in model.store_mut().get_mut(id).data_mut() {
            *v = rng.gen_range(-0.3..0.3);
        }
    }
    Ok((model, g))
}

/// Checks `n_graphs` random cases. With `fault` set, the analytic gradient of
/// that parameter is corrupted first, which must make the check fail.
pub fn run(seed: u64, n_graphs: usize, fault: Option<&str>) -> Result<GradCheckReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst_param: String::new(),
        graphs: 0,
        scalars: 0,
        resampled: 0,
    };
    while report.graphs < n_graphs {
        let (model, g) = random_case(&mut rng)?;
        let aug = model.augment(&g)?;
        let fwd = model.forward(&aug, Mode::Eval)?;
        if fwd.tape.min_relu_margin() < KINK_MARGIN {
            report.resampled += 1;
            if report.resampled > 100 * n_graphs.max(1) {
                return Err(Error::NonFinite("could not sample kink-free cases".into()));
            }
            continue;
        }
        let label = g.label().unwrap_or(true);
        let (_, mut analytic) = fwd.loss_and_grads(label, model.store())?;
        if let Some(name) = fault {
            let id = model.store().id(name).ok_or_else(|| Error::Unknown {
                kind: "parameter",
                name: name.into(),
            })?;
            let t = analytic.get_mut(id);
            let x = t.data()[0];
            t.data_mut()[0] = x + 0.1 * x.abs().max(1.0);
        }
        let numeric = numeric_gradients(&model, &g, FD_STEP)?;
        let (err, name) = compare(&model, &analytic, &numeric);
        if err > report.max_rel_error || report.worst_param.is_empty() {
            report.max_rel_error = err.max(report.max_rel_error);
            report.worst_param = name;
        }
        report.graphs += 1;
        report.scalars += model.store().n_scalars();
    }
    Ok(report)
}

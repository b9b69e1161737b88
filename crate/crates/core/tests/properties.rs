use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use vcn::column::{cln_step, init_states, Activation, ColumnState};
use vcn::data::random_graph;
use vcn::graph::{build_neighbor_index, Edge, Graph};
use vcn::model::{param_layout, read_checkpoint, write_checkpoint, VcnParams};
use vcn::numerics::Tape;
use vcn::{ModelConfig, Readout, Vcn};

fn model(seed: u64, cfg: ModelConfig) -> Vcn {
    Vcn::new(cfg, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap()
}

fn graph(seed: u64, n: usize, p: usize, d_x: usize) -> Graph {
    random_graph(&mut ChaCha8Rng::seed_from_u64(seed), n, p, d_x, None, 0.35).unwrap()
}

fn column_values(tape: &Tape, s: &ColumnState) -> Vec<Vec<f64>> {
    s.h.iter().map(|&v| tape.value(v).to_vec()).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn node_states_are_permutation_equivariant(seed in any::<u64>(), n in 1usize..12, steps in 1usize..6) {
        let g = graph(seed, n, 2, 3);
        let m = model(seed ^ 1, ModelConfig { d_h: 4, d_v: 3, steps, ..ModelConfig::for_data(3, 3, 2) });
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed ^ 2));
        let a = m.node_states(&g).unwrap();
        let b = m.node_states(&g.permute_nodes(&perm).unwrap()).unwrap();
        for i in 0..n {
            prop_assert_eq!(&a[i], &b[perm[i]]);
        }
    }

    #[test]
    fn cln_step_ignores_node_iteration_order(seed in any::<u64>(), n in 2usize..10) {
        let g = graph(seed, n, 2, 2);
        let m = model(seed, ModelConfig { d_h: 3, use_virtual: false, readout: Readout::Mean, ..ModelConfig::for_data(2, 2, 2) });
        let index = build_neighbor_index(&g);

        let mut tape = Tape::new();
        let col = m.params().column.bind(&mut tape, m.store());
        let s1 = init_states(&mut tape, &g, &col).unwrap();
        let forward = cln_step(&mut tape, &s1, &index, &col, None, Activation::Relu).unwrap();
        let forward = column_values(&tape, &forward);

        // update nodes one at a time in reverse order, each from the frozen state
        let mut rev = vec![Vec::new(); n];
        for i in (0..n).rev() {
            let mut t2 = Tape::new();
            let col2 = m.params().column.bind(&mut t2, m.store());
            let s = init_states(&mut t2, &g, &col2).unwrap();
            let next = cln_step(&mut t2, &s, &index, &col2, None, Activation::Relu).unwrap();
            rev[i] = t2.value(next.h[i]).to_vec();
        }
        prop_assert_eq!(forward, rev);
    }

    #[test]
    fn parameter_count_ignores_graph_size_and_steps(steps in 1usize..20, p in 1usize..4) {
        let base = ModelConfig { steps: 1, ..ModelConfig::for_data(3, 2, p) };
        let cfg = ModelConfig { steps, ..base.clone() };
        prop_assert_eq!(param_layout(&base), param_layout(&cfg));
    }

    #[test]
    fn checkpoint_round_trip_keeps_scores(seed in any::<u64>()) {
        let m = model(seed, ModelConfig { d_h: 5, d_v: 3, reset_gate: true, head_hidden: Some(2), ..ModelConfig::for_data(2, 1, 1) });
        let mut buf = Vec::new();
        write_checkpoint(&m, &mut buf).unwrap();
        let back = read_checkpoint(buf.as_slice()).unwrap();
        prop_assert_eq!(&back, &m);
        let g = graph(seed, 6, 1, 2);
        prop_assert_eq!(back.score(&g).unwrap().to_bits(), m.score(&g).unwrap().to_bits());
    }
}

/// Each step shares one set of weights. Binding the weights separately per
/// step and adding the per-copy adjoints must reproduce the tied gradient.
#[test]
fn tied_gradient_is_the_sum_over_untied_copies() {
    let g = graph(11, 7, 2, 3);
    let m = model(
        5,
        ModelConfig {
            d_h: 4,
            use_virtual: false,
            readout: Readout::Mean,
            activation: Activation::Tanh,
            ..ModelConfig::for_data(3, 3, 2)
        },
    );
    let index = build_neighbor_index(&g);
    let steps = 3;
    let run = |untied: bool| {
        let mut tape = Tape::new();
        let mut copies = vec![m.params().column.bind(&mut tape, m.store())];
        let mut s = init_states(&mut tape, &g, &copies[0]).unwrap();
        for _ in 0..steps {
            if untied {
                copies.push(m.params().column.bind(&mut tape, m.store()));
            }
            let col = copies.last().unwrap().clone();
            s = cln_step(&mut tape, &s, &index, &col, None, Activation::Tanh).unwrap();
        }
        let pooled = tape.mean(&s.h).unwrap();
        let sum_w =
            tape.input(&vcn::numerics::Tensor::from_rows(&[&[1.0, -1.0, 0.5, 2.0]]).unwrap());
        let out = tape.matvec(sum_w, pooled).unwrap();
        (tape, copies, out)
    };
    let (tied_tape, tied, out) = run(false);
    let tied_adj = tied_tape.adjoints(out).unwrap();
    let (untied_tape, copies, out2) = run(true);
    let untied_adj = untied_tape.adjoints(out2).unwrap();
    assert_eq!(copies.len(), steps + 1);
    let cand_w = |c: &vcn::column::BoundColumn| c.candidate.w.index();
    let tied_grad = tied_adj[cand_w(&tied[0])].clone().unwrap();
    let mut sum = vec![0.0; tied_grad.len()];
    for c in &copies {
        if let Some(a) = &untied_adj[cand_w(c)] {
            sum.iter_mut().zip(a).for_each(|(s, x)| *s += x);
        }
    }
    for (a, b) in tied_grad.iter().zip(&sum) {
        assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0), "{a} vs {b}");
    }
    assert!(untied_adj[cand_w(&copies[0])].is_none());
}

#[test]
fn distant_nodes_do_not_reach_without_virtual_column() {
    let n = 9;
    let edges: Vec<Edge> = (1..n)
        .flat_map(|i| [Edge::new(i - 1, i, 0), Edge::new(i, i - 1, 0)])
        .collect();
    let g = Graph::new(1, vec![vec![0.3, -0.2]; n], edges, None, None).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for steps in 1..=4 {
        let m = model(
            rng.gen(),
            ModelConfig {
                d_h: 4,
                steps,
                use_virtual: false,
                readout: Readout::Mean,
                activation: Activation::Tanh,
                ..ModelConfig::for_data(2, 2, 1)
            },
        );
        let base = m.node_states(&g).unwrap();
        for j in 0..n {
            let moved = m
                .node_states(&g.with_node_attrs(j, vec![1.7, 0.9]).unwrap())
                .unwrap();
            for i in 0..n {
                let changed = base[i] != moved[i];
                let dist = i.abs_diff(j);
                if dist > steps - 1 {
                    assert!(!changed, "steps {steps}: node {j} reached node {i}");
                } else {
                    assert!(changed, "steps {steps}: node {j} should reach node {i}");
                }
            }
        }
    }
}

#[test]
fn virtual_column_reaches_every_node_in_two_steps() {
    let n = 15;
    let edges: Vec<Edge> = (1..n)
        .flat_map(|i| [Edge::new(i - 1, i, 0), Edge::new(i, i - 1, 0)])
        .collect();
    let g = Graph::new(1, vec![vec![0.3, -0.2]; n], edges, None, None).unwrap();
    for readout in [Readout::Virtual, Readout::Mean] {
        let m = model(
            21,
            ModelConfig {
                d_h: 4,
                d_v: 4,
                steps: 3,
                readout,
                activation: Activation::Tanh,
                ..ModelConfig::for_data(2, 2, 1)
            },
        );
        let base = m.node_states(&g).unwrap();
        let moved = m
            .node_states(&g.with_node_attrs(0, vec![2.0, 1.0]).unwrap())
            .unwrap();
        assert!(base.iter().zip(&moved).all(|(a, b)| a != b), "{readout:?}");
        let s0 = m.score(&g).unwrap();
        for j in 0..n {
            let s1 = m
                .score(&g.with_node_attrs(j, vec![2.0, 1.0]).unwrap())
                .unwrap();
            assert_ne!(s0, s1, "{readout:?}: node {j} has no influence");
        }
    }
}

#[test]
fn params_resolve_against_store_layout() {
    let cfg = ModelConfig {
        reset_gate: true,
        head_hidden: Some(3),
        ..ModelConfig::for_data(4, 2, 3)
    };
    let m = model(0, cfg.clone());
    let layout = param_layout(&cfg);
    assert_eq!(m.store().len(), layout.len());
    for ((_, name, t), (lname, r, c)) in m.store().iter().zip(&layout) {
        assert_eq!(name, lname);
        assert_eq!(t.shape(), (*r, *c));
    }
    let other = ModelConfig {
        n_edge_types: 2,
        ..cfg
    };
    assert!(VcnParams::resolve(&other, m.store()).is_err());
}

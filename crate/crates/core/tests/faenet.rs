use faframe::diffmath::{AdamW, Tape, Tensor};
use faframe::faenet::{batch_gradients, train_step, FAENet, FAENetConfig, MpVariant, Objective, Sample};
use faframe::frames::{canonicalize, compute_frame, FrameGroup};
use faframe::geometry::{apply_transform, random_transform, AtomicSystem, Group, Vector3};
use faframe::strategy::builtin;
use faframe::seeded_rng;
use rand::Rng;

fn random_system(n: usize, seed: u64) -> AtomicSystem {
    let mut rng = seeded_rng(seed);
    let pos = (0..n)
        .map(|_| Vector3::from_fn(|_, _| rng.random_range(-2.5..2.5)))
        .collect();
    let z = (0..n).map(|_| rng.random_range(1..=30)).collect();
    AtomicSystem::new(pos, z).unwrap()
}

fn desk_model(seed: u64) -> FAENet {
    FAENet::new(FAENetConfig::desk(), &mut seeded_rng(seed)).unwrap()
}

/// Perturb every bias so zero-initialised terms take part in the checks.
fn jitter_biases(model: &mut FAENet, seed: u64) {
    let mut rng = seeded_rng(seed);
    let names: Vec<String> = model.params().names().to_vec();
    for (i, name) in names.iter().enumerate() {
        if name.ends_with(".bias") {
            for v in model.params_mut().get_mut(i).data_mut() {
                *v = rng.random_range(-0.3..0.3);
            }
        }
    }
}

#[test]
fn full_fa_is_invariant_and_equivariant() {
    let mut model = desk_model(0);
    jitter_biases(&mut model, 1);
    let full = builtin("full").unwrap();
    let mut rng = seeded_rng(2);
    for seed in 0..10 {
        let n = rng.random_range(3..=12);
        let s = random_system(n, 100 + seed);
        if compute_frame(&s, FrameGroup::E3).degenerate {
            continue;
        }
        let p = model.forward(&s, full.as_ref(), &mut rng).unwrap();
        let fp = p.forces.clone().unwrap();
        let fmax = fp.iter().map(|f| f.amax()).fold(0.0, f64::max);
        for _ in 0..5 {
            let g = random_transform(Group::E3, &mut rng);
            let q = model.forward(&apply_transform(&s, &g), full.as_ref(), &mut rng).unwrap();
            assert!((p.energy - q.energy).abs() <= 1e-6 * (1.0 + p.energy.abs()));
            for (a, b) in fp.iter().zip(q.forces.as_ref().unwrap()) {
                assert!((g.rotation() * a - b).amax() <= 1e-6 * (1.0 + fmax));
            }
        }
    }
}

#[test]
fn unsymmetrised_model_is_not_invariant() {
    let model = desk_model(3);
    let none = builtin("none").unwrap();
    let mut rng = seeded_rng(4);
    let s = random_system(6, 5);
    let p = model.forward(&s, none.as_ref(), &mut rng).unwrap();
    let g = random_transform(Group::SO3, &mut rng);
    let q = model.forward(&apply_transform(&s, &g), none.as_ref(), &mut rng).unwrap();
    assert!((p.energy - q.energy).abs() > 1e-6);
}

#[test]
fn relabelling_atoms_permutes_outputs() {
    let mut model = desk_model(6);
    jitter_biases(&mut model, 7);
    let mut rng = seeded_rng(8);
    for name in ["full", "none"] {
        let strategy = builtin(name).unwrap();
        for seed in 0..5 {
            let s = random_system(8, 200 + seed);
            let mut order: Vec<usize> = (0..8).collect();
            for i in (1..8).rev() {
                order.swap(i, rng.random_range(0..=i));
            }
            let t = s.permuted(&order).unwrap();
            let p = model.forward(&s, strategy.as_ref(), &mut rng).unwrap();
            let q = model.forward(&t, strategy.as_ref(), &mut rng).unwrap();
            assert!((p.energy - q.energy).abs() <= 1e-12 * (1.0 + p.energy.abs()));
            let fp = p.forces.unwrap();
            let fq = q.forces.unwrap();
            for (k, &i) in order.iter().enumerate() {
                assert!((fq[k] - fp[i]).amax() <= 1e-12);
            }
        }
    }
}

#[test]
fn stochastic_mean_approaches_full_average() {
    let model = FAENet::new(
        FAENetConfig {
            predict_forces: false,
            ..FAENetConfig::desk()
        },
        &mut seeded_rng(9),
    )
    .unwrap();
    let s = random_system(5, 10);
    let mut rng = seeded_rng(11);
    let exact = model.forward(&s, builtin("full").unwrap().as_ref(), &mut rng).unwrap().energy;
    let sfa = builtin("stochastic").unwrap();
    let n = 4000;
    let xs: Vec<f64> = (0..n)
        .map(|_| model.forward(&s, sfa.as_ref(), &mut rng).unwrap().energy)
        .collect();
    let mean = xs.iter().sum::<f64>() / n as f64;
    let se = (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64 / n as f64).sqrt();
    assert!((mean - exact).abs() < 3.0 * se, "{mean} vs {exact}, se {se}");
}

#[test]
fn matched_frames_give_identical_edge_embeddings() {
    let model = desk_model(12);
    let s = random_system(7, 13);
    let mut rng = seeded_rng(14);
    let g = random_transform(Group::E3, &mut rng);
    let moved = apply_transform(&s, &g);
    let f = compute_frame(&s, FrameGroup::E3);
    // the matched element of F(gX) is g∘f
    let a = canonicalize(&s, &f.elements[3]);
    let b = canonicalize(&moved, &g.compose(&f.elements[3]));
    let ia = model.prepare(&a.system).unwrap();
    let ib = model.prepare(&b.system).unwrap();
    assert_eq!(ia.rel.shape()[1], 3);
    assert_eq!(ia.rbf.shape()[1], model.config().num_gaussians);
    let mut tape = Tape::new();
    let p = model.params().bind_constant(&mut tape);
    let ea = model.embed_edges(&mut tape, &p, &ia).unwrap();
    let eb = model.embed_edges(&mut tape, &p, &ib).unwrap();
    let (ta, tb) = (tape.value(ea), tape.value(eb));
    assert_eq!(ta.shape(), tb.shape());
    for (x, y) in ta.data().iter().zip(tb.data()) {
        assert!((x - y).abs() < 1e-9);
    }
}

#[test]
fn isolated_node_gets_closed_form_update() {
    let mut model = desk_model(15);
    jitter_biases(&mut model, 16);
    // atom 2 is far outside the cutoff of the others
    let s = AtomicSystem::new(
        vec![Vector3::zeros(), Vector3::new(1.2, 0.0, 0.0), Vector3::new(30.0, 0.0, 0.0)],
        vec![6, 8, 1],
    )
    .unwrap();
    let inputs = model.prepare(&s).unwrap();
    assert!(inputs.dst.iter().all(|&d| d != 2));
    let mut tape = Tape::new();
    let p = model.params().bind_constant(&mut tape);
    let h0 = model.embed_nodes(&mut tape, &p, &inputs).unwrap();
    let e = model.embed_edges(&mut tape, &p, &inputs).unwrap();
    let h1 = model.interaction(&mut tape, &p, 0, h0, e, &inputs).unwrap();
    let bias = model.params().by_name("interaction0.update.bias").unwrap();
    let swish = |x: f64| x / (1.0 + (-x).exp());
    let hidden = model.config().hidden_channels;
    for c in 0..hidden {
        let want = tape.value(h0).at(2, c) + swish(bias.data()[c]);
        assert!((tape.value(h1).at(2, c) - want).abs() < 1e-14);
    }
}

#[test]
fn basic_variant_with_zero_edges_sends_no_messages() {
    let cfg = FAENetConfig {
        mp_variant: MpVariant::Basic,
        ..FAENetConfig::desk()
    };
    let mut model = FAENet::new(cfg, &mut seeded_rng(17)).unwrap();
    jitter_biases(&mut model, 18);
    let s = random_system(5, 19);
    let inputs = model.prepare(&s).unwrap();
    assert!(!inputs.src.is_empty());
    let mut tape = Tape::new();
    let p = model.params().bind_constant(&mut tape);
    let h0 = model.embed_nodes(&mut tape, &p, &inputs).unwrap();
    let e = tape.constant(Tensor::zeros(&[inputs.src.len(), model.config().num_filters]));
    let h1 = model.interaction(&mut tape, &p, 0, h0, e, &inputs).unwrap();
    // zero messages leave only the bias path, the same for every node
    let bias = model.params().by_name("interaction0.update.bias").unwrap();
    let swish = |x: f64| x / (1.0 + (-x).exp());
    for r in 0..5 {
        for c in 0..model.config().hidden_channels {
            let want = tape.value(h0).at(r, c) + swish(bias.data()[c]);
            assert!((tape.value(h1).at(r, c) - want).abs() < 1e-14);
        }
    }
}

#[test]
fn single_atom_is_degenerate_but_finite() {
    let model = desk_model(20);
    let s = AtomicSystem::new(vec![Vector3::new(0.5, 0.5, 0.5)], vec![26]).unwrap();
    assert!(compute_frame(&s, FrameGroup::E3).degenerate);
    let p = model.forward(&s, builtin("full").unwrap().as_ref(), &mut seeded_rng(0)).unwrap();
    assert!(p.energy.is_finite());
}

#[test]
fn zero_learning_rate_leaves_parameters() {
    let mut model = desk_model(21);
    let before = model.params().clone();
    let batch = vec![Sample::energy_only(random_system(4, 22), 1.5)];
    let mut opt = AdamW::new(0.0, 0.0);
    let loss = train_step(
        &mut model,
        &batch,
        Objective::energy_only(),
        builtin("full").unwrap().as_ref(),
        &mut opt,
        &mut seeded_rng(0),
    )
    .unwrap();
    assert!(loss.is_finite());
    for i in 0..before.len() {
        assert_eq!(before.get(i), model.params().get(i));
    }
}

#[test]
fn force_head_untouched_without_force_loss() {
    let model = desk_model(23);
    let s = random_system(5, 24);
    let sample = Sample {
        forces: Some(vec![Vector3::new(0.1, -0.2, 0.3); 5]),
        ..Sample::energy_only(s, -2.0)
    };
    let (_, grads) = batch_gradients(
        &model,
        &[sample.clone()],
        Objective::Regression {
            energy: 1.0,
            force: 0.0,
        },
        builtin("full").unwrap().as_ref(),
        &mut seeded_rng(0),
    )
    .unwrap();
    let head = model.force_head_params();
    assert!(!head.is_empty());
    for &i in &head {
        assert!(grads[i].data().iter().all(|&g| g == 0.0));
    }
    // with a force term the head does learn
    let (_, grads) = batch_gradients(
        &model,
        &[sample],
        Objective::Regression {
            energy: 1.0,
            force: 10.0,
        },
        builtin("full").unwrap().as_ref(),
        &mut seeded_rng(0),
    )
    .unwrap();
    assert!(head.iter().any(|&i| grads[i].data().iter().any(|&g| g != 0.0)));
}

#[test]
fn single_sample_overfits() {
    let cfg = FAENetConfig {
        predict_forces: false,
        ..FAENetConfig::desk()
    };
    let mut model = FAENet::new(cfg, &mut seeded_rng(25)).unwrap();
    let batch = vec![Sample::energy_only(random_system(5, 26), 3.0)];
    let full = builtin("full").unwrap();
    let mut opt = AdamW::new(1e-3, 0.0);
    let mut rng = seeded_rng(27);
    let losses: Vec<f64> = (0..500)
        .map(|_| {
            train_step(&mut model, &batch, Objective::energy_only(), full.as_ref(), &mut opt, &mut rng)
                .unwrap()
        })
        .collect();
    let windows: Vec<f64> = losses.chunks(50).map(|w| w.iter().sum::<f64>() / 50.0).collect();
    for w in windows.windows(2) {
        assert!(w[1] < w[0], "{windows:?}");
    }
    assert!(*losses.last().unwrap() < 0.01 * losses[0], "{} -> {}", losses[0], losses[499]);
}

#[test]
fn parameter_count_depends_only_on_config() {
    let a = desk_model(1).num_parameters();
    let b = desk_model(2).num_parameters();
    assert_eq!(a, b);
    let default = FAENet::new(FAENetConfig::default(), &mut seeded_rng(0)).unwrap();
    assert_eq!(default.num_parameters(), 5_318_978);
}

mod common;

use cgfl_core::metalearn::{meta_test, meta_train, Model, TrainConfig};
use common::{small_encoder, small_problem, small_train};

#[test]
fn zero_epochs_leave_parameters_untouched() {
    let enc = small_encoder();
    let (sources, target) = small_problem(&enc);
    let mut model = Model::new(&enc, 7).unwrap();
    let before = model.store.checksum();
    let cfg = TrainConfig {
        epochs: 0,
        ..small_train()
    };
    let report = meta_train(&sources, &target, &mut model, &cfg, 7).unwrap();
    assert!(report.epochs.is_empty());
    assert_eq!(model.store.checksum(), before);
}

#[test]
fn same_seed_same_run() {
    let enc = small_encoder();
    let (sources, target) = small_problem(&enc);
    let run = || {
        let mut model = Model::new(&enc, 3).unwrap();
        let report = meta_train(&sources, &target, &mut model, &small_train(), 3).unwrap();
        let test = meta_test(&target, &model, &small_train(), 3).unwrap();
        (report, model.store.checksum(), test.accuracy)
    };
    let (a, ca, acc_a) = run();
    let (b, cb, acc_b) = run();
    assert_eq!(a, b);
    assert_eq!(ca, cb);
    assert_eq!(acc_a.to_bits(), acc_b.to_bits());
}

#[test]
fn training_lowers_meta_loss() {
    let enc = small_encoder();
    let (sources, target) = small_problem(&enc);
    let mut model = Model::new(&enc, 5).unwrap();
    let cfg = TrainConfig {
        epochs: 30,
        ..small_train()
    };
    let report = meta_train(&sources, &target, &mut model, &cfg, 5).unwrap();
    let first = report.epochs[0].meta_loss;
    let last = report.epochs.last().unwrap().meta_loss;
    assert!(last < first, "{first} -> {last}");
    let gs = &report.scores.gs;
    assert_eq!(gs.len(), 2);
    assert!((gs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    for ts in &report.scores.ts {
        assert_eq!(ts.len(), cfg.tasks_per_graph);
        assert!((ts.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn meta_test_does_not_modify_the_model() {
    let enc = small_encoder();
    let (sources, target) = small_problem(&enc);
    let mut model = Model::new(&enc, 9).unwrap();
    meta_train(&sources, &target, &mut model, &small_train(), 9).unwrap();
    let before = model.store.checksum();
    let report = meta_test(&target, &model, &small_train(), 9).unwrap();
    assert_eq!(model.store.checksum(), before);
    assert_eq!(report.tasks.len(), small_train().test_tasks);
    assert!((0.0..=1.0).contains(&report.accuracy));
    assert!((0.0..=1.0).contains(&report.macro_f1));
}

#[test]
fn identical_embeddings_give_chance_accuracy() {
    let enc = small_encoder();
    let (_, target) = small_problem(&enc);
    let mut model = Model::new(&enc, 1).unwrap();
    // all-zero weights map every node to the same embedding, so every
    // prediction is a uniform tie-break
    for t in model.store.tensors_mut() {
        t.data_mut().iter_mut().for_each(|x| *x = 0.0);
    }
    let cfg = TrainConfig {
        test_tasks: 200,
        ..small_train()
    };
    let report = meta_test(&target, &model, &cfg, 4).unwrap();
    assert!((report.accuracy - 0.5).abs() < 0.06, "{}", report.accuracy);
}

#[test]
fn graph_score_gradient_stops_at_the_encoder() {
    use cgfl_core::encoder::embed_node;
    use cgfl_core::scoring::graph_scores;
    use cgfl_core::{ParamStore, Tape};

    let enc = small_encoder();
    let (sources, target) = small_problem(&enc);
    let mut model = Model::new(&enc, 2).unwrap();
    let mut tape = Tape::new();
    let mut embed = |g: &cgfl_core::encoder::PreparedGraph, v: usize| {
        let inputs = g.inputs(v).unwrap();
        let e = embed_node(&mut tape, &model.store, &model.params.encoder, &enc, inputs);
        (tape.value(e.h_mean).to_vec(), e.h)
    };
    let (a, ha) = embed(&sources[0], 0);
    let (b, _) = embed(&sources[1], 0);
    let (t, _) = embed(&target, 0);
    let gs = graph_scores(&mut tape, &model.store, &model.params.scores, &[a, b], &t).unwrap();
    // the embedding itself stays differentiable
    let ha_sum = tape.sum(ha);
    let pick = tape.gather_rows(gs, &[0]);
    let pick = tape.sum(pick);
    let loss = tape.add(pick, ha_sum);
    tape.backward(loss, &mut model.store).unwrap();
    let grad_of = |store: &ParamStore, id| store.get(id).grad().map(<[f64]>::to_vec).unwrap_or_default();
    assert!(grad_of(&model.store, model.params.scores.w_g).iter().any(|&g| g != 0.0));

    // same loss without the score term: encoder gradients must be identical
    let encoder_grads = |store: &ParamStore| -> Vec<Vec<f64>> {
        model.params.encoder.all().into_iter().map(|id| grad_of(store, id)).collect()
    };
    let with_score = encoder_grads(&model.store);
    let mut tape = Tape::new();
    let inputs = sources[0].inputs(0).unwrap();
    let e = embed_node(&mut tape, &model.store, &model.params.encoder, &enc, inputs);
    let loss = tape.sum(e.h);
    tape.backward(loss, &mut model.store).unwrap();
    let without = encoder_grads(&model.store);
    assert_eq!(with_score, without);
}

use cgs_core::baselines::{lda_accuracy, oracle_search, LinearProbe, DEFAULT_RIDGE};
use cgs_core::data::{make_planted_task, preset, Splits};
use cgs_core::topology::{build_distance_matrix, CommGraph, CommTopology};
use cgs_core::train::{mean_std, train, LayerSetup, TrainConfig, TrainedModel};

fn split_task(t: f64) -> (Splits, CommTopology) {
    let task = make_planted_task(&preset("split-grid-8", 0).unwrap()).unwrap();
    let splits = task.data.split(0.25, 0.2, 0).unwrap();
    let d = build_distance_matrix(&task.layout, true).unwrap();
    (splits, CommTopology::new(d, CommGraph::line(3).unwrap(), t).unwrap())
}

fn probe(s: &Splits, m: &TrainedModel) -> f64 {
    lda_accuracy(&s.train, &s.test, &m.selection.assignment, DEFAULT_RIDGE).unwrap()
}

/// Mean entropy per vertex over the first and last tenth of the run.
fn entropy_trend(m: &TrainedModel) -> (Vec<f64>, Vec<f64>) {
    let k = (m.curves.len() / 10).max(1);
    let avg = |recs: &[cgs_core::train::EpochRecord]| {
        let dims = recs[0].entropies.len();
        (0..dims)
            .map(|v| recs.iter().map(|r| r.entropies[v]).sum::<f64>() / recs.len() as f64)
            .collect::<Vec<f64>>()
    };
    (avg(&m.curves[..k]), avg(&m.curves[m.curves.len() - k..]))
}

#[test]
fn unconstrained_training_matches_oracle_and_sharpens() {
    let (s, topo) = split_task(1.0);
    let oracle = oracle_search(
        topo.distances(),
        topo.graph(),
        topo.thresholds(),
        &LinearProbe::new(&s.train, &s.test),
    )
    .unwrap();
    let mut close = 0;
    let mut sharpened = 0;
    for seed in 0..10 {
        let cfg = TrainConfig { seed, ..TrainConfig::default() };
        let m = train(&s.train, &s.val, LayerSetup::Conditional(&topo), &cfg).unwrap();
        if probe(&s, &m) >= oracle.score - 0.02 {
            close += 1;
        }
        let (early, late) = entropy_trend(&m);
        if early.iter().zip(&late).all(|(e, l)| l <= e) {
            sharpened += 1;
        }
    }
    assert!(close >= 8, "{close}/10 seeds within 2 points of the oracle");
    assert!(sharpened >= 8, "{sharpened}/10 seeds with decreasing entropy");
}

#[test]
fn more_rounds_reduce_seed_variance() {
    let (s, topo) = split_task(0.3);
    let spread = |rounds| {
        let acc: Vec<f64> = (0..10)
            .map(|seed| {
                let cfg = TrainConfig { seed, n_rounds: rounds, ..TrainConfig::default() };
                probe(&s, &train(&s.train, &s.val, LayerSetup::Conditional(&topo), &cfg).unwrap())
            })
            .collect();
        mean_std(&acc).unwrap().1
    };
    let (one, five) = (spread(1), spread(5));
    assert!(five < one, "std with 5 rounds {five} vs 1 round {one}");
}

#[test]
fn tight_threshold_costs_accuracy() {
    let cfg = TrainConfig { epochs: 150, ..TrainConfig::default() };
    let (s, loose) = split_task(1.0);
    let tight = loose.at_threshold(0.3);
    let a_loose = probe(&s, &train(&s.train, &s.val, LayerSetup::Conditional(&loose), &cfg).unwrap());
    let a_tight = probe(&s, &train(&s.train, &s.val, LayerSetup::Conditional(&tight), &cfg).unwrap());
    assert!(a_tight < a_loose - 0.2, "tight {a_tight}, loose {a_loose}");
}

#[test]
fn training_is_reproducible_and_round_trips() {
    let (s, topo) = split_task(0.5);
    let cfg = TrainConfig { epochs: 15, seed: 7, ..TrainConfig::default() };
    let a = train(&s.train, &s.val, LayerSetup::Conditional(&topo), &cfg).unwrap();
    let b = train(&s.train, &s.val, LayerSetup::Conditional(&topo), &cfg).unwrap();
    assert_eq!(a, b);
    assert!(topo.check_edges(&a.selection));

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.json");
    a.save(&path).unwrap();
    let back = TrainedModel::load(&path).unwrap();
    assert_eq!(back, a);
    assert_eq!(back.evaluate(&s.test).unwrap(), a.evaluate(&s.test).unwrap());
    assert_eq!(a.curves_csv().lines().count(), 16);
}

#[test]
fn vanilla_layer_infers_row_argmax() {
    let (s, _) = split_task(1.0);
    let cfg = TrainConfig { epochs: 10, ..TrainConfig::default() };
    let m = train(&s.train, &s.val, LayerSetup::Independent { m: 3 }, &cfg).unwrap();
    let cgs_core::selection::SelectionLayer::Independent(layer) = &m.layer else {
        panic!("expected an independent layer");
    };
    for (v, &node) in m.selection.assignment.iter().enumerate() {
        assert_eq!(node, cgs_core::concrete::argmax(layer.row(v)));
    }
}

#[test]
fn early_stopping_restores_best_epoch() {
    let (s, topo) = split_task(0.5);
    let cfg = TrainConfig {
        epochs: 200,
        patience: Some(5),
        ..TrainConfig::default()
    };
    let m = train(&s.train, &s.val, LayerSetup::Conditional(&topo), &cfg).unwrap();
    assert!(m.epochs_ran <= 200);
    let best = m.curves.iter().map(|r| r.val_loss).fold(f64::INFINITY, f64::min);
    assert_eq!(m.curves[m.best_epoch].val_loss, best);
    if m.epochs_ran < 200 {
        assert_eq!(m.epochs_ran, m.best_epoch + 6);
    }
}

use pnd_core::datasets::{
    gen_chains, gen_regular_homophily, load_dataset, load_splits, make_splits, remove_inductive_edges, save_dataset,
    ChainsConfig, RegularConfig, SplitConfig,
};
use pnd_core::graph::homophily;
use pnd_core::Error;
use proptest::prelude::*;

#[test]
fn chains_round_trip_is_bit_exact() {
    let data = gen_chains(
        &ChainsConfig {
            noise: 0.3,
            noise_dim: 4,
            ..ChainsConfig::default()
        },
        5,
    )
    .unwrap();
    let dir = tempfile::tempdir().unwrap();
    save_dataset(&data.dataset, dir.path(), Some(&data.split)).unwrap();
    let back = load_dataset(dir.path()).unwrap();
    assert_eq!(back, data.dataset);
    let split = load_splits(dir.path(), back.num_nodes()).unwrap().unwrap();
    assert_eq!(split, data.split);
}

#[test]
fn chains_shape() {
    let data = gen_chains(&ChainsConfig::default(), 0).unwrap();
    assert_eq!(data.dataset.num_nodes(), 240);
    assert_eq!(data.dataset.graph.num_edges(), 210);
    assert_eq!(data.far_nodes.len(), 30 * 5);
    assert_eq!(homophily(&data.dataset.graph, &data.dataset.labels).unwrap(), 1.0);
}

#[test]
fn load_errors_name_file_and_line() {
    let data = gen_chains(&ChainsConfig::default(), 0).unwrap();
    let dir = tempfile::tempdir().unwrap();
    save_dataset(&data.dataset, dir.path(), None).unwrap();
    let labels = dir.path().join("labels.tsv");
    let mut text = std::fs::read_to_string(&labels).unwrap();
    text = text.replacen("0\n", "x\n", 1);
    std::fs::write(&labels, text).unwrap();
    match load_dataset(dir.path()) {
        Err(Error::Load { file, line, .. }) => {
            assert_eq!(file, labels);
            assert_eq!(line, 1);
        }
        other => panic!("expected a load error, got {other:?}"),
    }
    assert!(matches!(load_dataset(dir.path().join("missing")), Err(Error::Io { .. })));
}

#[test]
fn regular_graph_audit() {
    let cfg = RegularConfig {
        degree: 10,
        homophily: 0.8,
        num_classes: 5,
        nodes_per_class: 50,
        feature_noise: 0.1,
    };
    let ds = gen_regular_homophily(&cfg, 3).unwrap();
    assert_eq!(ds.num_nodes(), 250);
    for v in 0..ds.num_nodes() {
        let nbrs = ds.graph.neighbors(v);
        assert_eq!(nbrs.len(), 10, "node {v}");
        let same = nbrs.iter().filter(|&&u| ds.labels[u as usize] == ds.labels[v]).count();
        assert_eq!(same, 8, "node {v}");
    }
    assert!((homophily(&ds.graph, &ds.labels).unwrap() - 0.8).abs() < 1e-12);
}

#[test]
fn inductive_split_sizes() {
    // 7 classes of 100 nodes: pool = 700 − 7·50 = 350.
    let labels: Vec<usize> = (0..700).map(|i| i % 7).collect();
    let cfg = SplitConfig {
        inductive: true,
        ..SplitConfig::default()
    };
    let s = make_splits(&labels, 7, 1, &cfg).unwrap();
    assert_eq!(s.test_ind.len(), 70);
    assert_eq!(s.test_obs.len(), 280);
    s.validate(700).unwrap();
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn splits_partition_and_are_deterministic(seed in any::<u64>(), per_class in 50usize..90, k in 2usize..6, inductive in any::<bool>()) {
        let labels: Vec<usize> = (0..per_class * k).map(|i| i % k).collect();
        let cfg = SplitConfig { inductive, ..SplitConfig::default() };
        let a = make_splits(&labels, k, seed, &cfg).unwrap();
        let b = make_splits(&labels, k, seed, &cfg).unwrap();
        prop_assert_eq!(&a, &b);
        a.validate(labels.len()).unwrap();
        for c in 0..k {
            prop_assert_eq!(a.train.iter().filter(|&&i| labels[i] == c).count(), 20);
            prop_assert_eq!(a.val.iter().filter(|&&i| labels[i] == c).count(), 30);
        }
    }

    #[test]
    fn inductive_nodes_become_isolated(seed in any::<u64>()) {
        let data = gen_chains(&ChainsConfig::default(), seed).unwrap();
        let ind: Vec<usize> = data.far_nodes.iter().copied().filter(|i| i % 2 == 0).collect();
        let g = remove_inductive_edges(&data.dataset.graph, &ind);
        for &i in &ind {
            prop_assert_eq!(g.degree(i), 0);
        }
        for (u, v) in data.dataset.graph.edges() {
            let keep = !ind.contains(&u) && !ind.contains(&v);
            prop_assert_eq!(g.has_edge(u, v), keep);
        }
    }
}

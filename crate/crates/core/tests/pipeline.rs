use jeek::evalx::{confusion, sweep_with, SweepConfig, DEFAULT_EDGE_TOL};
use jeek::io::{read_json, write_json, EstimateFile, TruthFile};
use jeek::kw_norm::build_group_weights;
use jeek::simgen::{gen_random_graphs, sample_gaussian};
use jeek::{
    backward_map, default_v_grid, estimate, sample_covariance, select_v, KnowledgeWeights, PrecisionDecomposition,
};

#[test]
fn recovers_structure_with_plenty_of_data() {
    let truth = gen_random_graphs(12, 2, 21).unwrap();
    let data = sample_gaussian(&truth, 20_000, 22).unwrap();
    let lambdas: Vec<f64> = (1..=40).map(|i| 0.01 * i as f64).collect();
    let report = sweep_with(&data, &truth, &KnowledgeWeights::ones(12, 2), &lambdas, &SweepConfig::default()).unwrap();
    assert!(report.auc > 0.9, "auc {}", report.auc);
    assert!(report.f1 > 0.8, "f1 {}", report.f1);
    assert_eq!(report.rows.len(), 40);
}

#[test]
fn estimate_is_symmetric_and_round_trips() {
    let truth = gen_random_graphs(15, 3, 5).unwrap();
    let data = sample_gaussian(&truth, 200, 6).unwrap();
    let cov = sample_covariance(&data).unwrap();
    let v = select_v(&cov, &default_v_grid()).unwrap();
    let bmap = backward_map(&cov, v).unwrap();
    let est = estimate(&bmap, &KnowledgeWeights::ones(15, 3), 0.05).unwrap();
    for m in est.omega_individual.iter().chain(std::iter::once(&est.omega_shared)) {
        assert_eq!(m, &m.transpose());
    }

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("estimate.json");
    write_json(&path, &EstimateFile::new(&est, 0.05, v)).unwrap();
    let back: EstimateFile = read_json(&path).unwrap();
    assert_eq!(back.decomposition().unwrap(), est);
    assert_eq!((back.lambda, back.v_used), (0.05, v));

    let tpath = dir.path().join("truth.json");
    write_json(&tpath, &TruthFile::new(&truth)).unwrap();
    let t: TruthFile = read_json(&tpath).unwrap();
    assert_eq!(t.ground_truth().unwrap().decomp, truth.decomp);
}

fn shared_nonzeros(d: &PrecisionDecomposition) -> usize {
    let p = d.p();
    (0..p).flat_map(|j| (0..j).map(move |c| (j, c))).filter(|&(j, c)| d.omega_shared[(j, c)] != 0.0).count()
}

#[test]
fn lower_shared_weight_moves_mass_to_shared_part() {
    let truth = gen_random_graphs(10, 2, 8).unwrap();
    let data = sample_gaussian(&truth, 300, 9).unwrap();
    let cov = sample_covariance(&data).unwrap();
    let bmap = backward_map(&cov, select_v(&cov, &default_v_grid()).unwrap()).unwrap();
    let all_pairs: Vec<(usize, usize)> = (0..10).flat_map(|j| (0..j).map(move |c| (j, c))).collect();
    let favoured = build_group_weights(10, 2, &all_pairs, 10.0).unwrap();
    let plain = estimate(&bmap, &KnowledgeWeights::ones(10, 2), 0.02).unwrap();
    let shared = estimate(&bmap, &favoured, 0.02).unwrap();
    assert!(shared_nonzeros(&shared) >= shared_nonzeros(&plain));
    // both are valid scorable estimates
    confusion(&plain, &truth, DEFAULT_EDGE_TOL).unwrap();
    confusion(&shared, &truth, DEFAULT_EDGE_TOL).unwrap();
}

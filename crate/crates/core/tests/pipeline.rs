mod common;

use common::clusters;
use trecon_core::algorithms::Algorithm;
use trecon_core::channel::{generate_indexed, ClusterSize, ErrorRates, GenerateConfig, NoiseDistribution};
use trecon_core::exec::Execution;
use trecon_core::io::{read_clusters, read_estimates, write_clusters, write_estimates};
use trecon_core::metrics::{evaluate, reconstruct_all, score, Grouping};
use trecon_core::Error;

#[test]
fn parallel_and_sequential_runs_agree() {
    let set = clusters(60, 5, 2, 40, 99);
    let hint = ErrorRates::uniform(0.075);
    for name in Algorithm::NAMES {
        let a = Algorithm::from_name(name).unwrap();
        let seq = reconstruct_all(&a, &set, &hint, Execution::Sequential);
        let par = reconstruct_all(&a, &set, &hint, Execution::Parallel);
        assert_eq!(seq, par, "{name}");
        assert!(seq.iter().all(|e| e.len() == 60), "{name}");
    }
}

#[test]
fn files_round_trip_through_evaluation() {
    let cfg = GenerateConfig::new(40, ClusterSize::Range(2..=10), NoiseDistribution::standard(0));
    let set: Vec<_> = (0..25).map(|i| generate_indexed(&cfg, 3, i).unwrap()).collect();
    let mut buf = Vec::new();
    write_clusters(&mut buf, &set).unwrap();
    let loaded = read_clusters(buf.as_slice()).unwrap();
    assert_eq!(loaded, set);

    let a = Algorithm::from_name("vs").unwrap();
    let hint = ErrorRates::uniform(0.055);
    let estimates = reconstruct_all(&a, &loaded, &hint, Execution::Parallel);
    let mut est_buf = Vec::new();
    write_estimates(&mut est_buf, &estimates).unwrap();
    let reread = read_estimates(est_buf.as_slice()).unwrap();
    let from_file = score("vs", &loaded, &reread, Grouping::BY_N, 0).unwrap();
    let direct = evaluate(&a, &loaded, &hint, Grouping::BY_N, 0, Execution::Sequential).unwrap();
    assert_eq!(from_file, direct);
}

#[test]
fn oracle_majority_needs_edit_scripts() {
    let mut c = clusters(20, 3, 0, 1, 1).remove(0);
    c.edits = None;
    let a = Algorithm::from_name("oracle-msa-majority").unwrap();
    assert!(matches!(
        a.reconstruct(&c, 20, &ErrorRates::uniform(0.05)),
        Err(Error::MissingEditScripts)
    ));
}

#[test]
fn unknown_algorithm_lists_registry() {
    let msg = Algorithm::from_name("muscle").unwrap_err().to_string();
    for name in Algorithm::NAMES {
        assert!(msg.contains(name));
    }
}

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};

use particle_clusters::experiment::{reference_scene, run_experiment, table2_base, table2_set_config, table2_sets, ExperimentConfig};
use particle_clusters::gmm::fit_increments;
use particle_clusters::io;
use particle_clusters::membership::{DistanceKind, Variant};
use particle_clusters::sim::{simulate, SimConfig};

#[test]
fn radius_only_single_run_lands_near_seventy_percent() {
    let sets = table2_sets();
    let base = ExperimentConfig { beta_r: 1.0, beta_s: 0.0, runs: 1, ..table2_base() };
    let config = table2_set_config(&base, 0, &sets[0]);
    let report = run_experiment(&config, None).unwrap();
    let acc = report.mean_accuracy();
    assert!((0.6..=0.8).contains(&acc), "accuracy {acc}");
}

#[test]
fn glued_particle_is_recognised_as_inside() {
    let config = ExperimentConfig {
        sim: SimConfig { n_clusters: 3, arena: 0.01, wiggle_sigma: 0.0, cluster_sigma: 0.5, ..SimConfig::default() },
        variant: Variant::ClosestCluster,
        distance: DistanceKind::Wasserstein,
        runs: 3,
        trials: 300,
        ..ExperimentConfig::default()
    };
    let report = run_experiment(&config, None).unwrap();
    assert!(report.is_complete(), "{:?}", report.runs);
    for run in report.successes() {
        assert_eq!(run.inside_fraction, 1.0);
        assert!(run.accuracy >= 0.95, "run {} accuracy {}", run.run, run.accuracy);
    }
}

#[test]
fn same_seed_same_report() {
    let config = ExperimentConfig {
        sim: SimConfig { horizon: 300, ..reference_scene() },
        runs: 2,
        trials: 200,
        master_seed: 77,
        ..ExperimentConfig::default()
    };
    let a = run_experiment(&config, None).unwrap();
    let b = run_experiment(&config, Some(1)).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.config, config);
    let other = run_experiment(&ExperimentConfig { master_seed: 78, ..config }, None).unwrap();
    assert_ne!(a.runs, other.runs);
}

#[test]
fn files_round_trip_through_disk() {
    let dir = tempfile::tempdir().unwrap();
    let sim = SimConfig { horizon: 150, n_clusters: 50, arena: 4.0, seed: 12, ..SimConfig::default() };
    let record = simulate(&sim).unwrap();

    let particle = dir.path().join("particle.csv");
    let clusters = dir.path().join("clusters.csv");
    io::write_particle_csv(&record, BufWriter::new(File::create(&particle).unwrap())).unwrap();
    io::write_clusters_csv(&record, BufWriter::new(File::create(&clusters).unwrap())).unwrap();
    let back = io::read_record(File::open(&particle).unwrap(), File::open(&clusters).unwrap(), 2).unwrap();
    assert_eq!(back, record);

    let plot = dir.path().join("plotdata.csv");
    io::write_plotdata(&record, sim.radius, File::create(&plot).unwrap()).unwrap();
    let rows = io::read_plotdata(File::open(&plot).unwrap(), 2).unwrap();
    assert_eq!(rows, io::plot_rows(&record, sim.radius));
    let text = std::fs::read_to_string(&plot).unwrap();
    for (line, row) in text.lines().skip(1).zip(&rows) {
        if !row.inside {
            assert!(line.ends_with(",,,,"), "{line}");
        }
    }

    let params = fit_increments(&record.increments()).unwrap().params;
    let gmm = dir.path().join("gmm.txt");
    let mut f = File::create(&gmm).unwrap();
    io::write_gmm(&params, &mut f).unwrap();
    f.flush().unwrap();
    assert_eq!(io::read_gmm(BufReader::new(File::open(&gmm).unwrap())).unwrap(), params);
}

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use blockhess::density::uniform_grid;
use blockhess::heterogeneity::{pairwise_heatmap, Normalization};
use blockhess::io::{self, Table};
use blockhess::operator::DenseSymmetric;
use blockhess::quadlab::{self, Case, RunOptions};
use blockhess::slq::{self, SpectralMeasure};
use blockhess::toynet::Dataset;

#[test]
fn density_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let grid = uniform_grid(-1.0, 3.0, 257);
    let d = SpectralMeasure::from_eigenvalues(&[0.1, 0.5, 2.2]).smooth(0.2, &grid).unwrap();
    let path = tmp.path().join("d.csv");
    io::write_table(&path, &io::density_table(&d)).unwrap();
    let back = io::read_density(&path).unwrap();
    assert_eq!(back.grid(), d.grid());
    // reading renormalizes, which may move the last bit
    for (a, b) in back.values().iter().zip(d.values()) {
        assert!((a - b).abs() <= 1e-14 * b.abs().max(1e-300));
    }
}

#[test]
fn heatmap_and_js0_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let grid = uniform_grid(0.0, 4.0, 300);
    let ds: Vec<_> = [1.0, 1.5, 3.0]
        .iter()
        .map(|&c| SpectralMeasure::from_eigenvalues(&[c]).smooth(0.3, &grid).unwrap())
        .collect();
    let report = pairwise_heatmap(&ds, Some(vec!["a".into(), "b".into(), "c".into()]), Normalization::None).unwrap();
    let path = tmp.path().join("h.csv");
    io::write_table(&path, &io::heatmap_table(&report)).unwrap();
    let (labels, m) = io::read_heatmap(&path).unwrap();
    assert_eq!(labels, report.labels);
    assert_eq!(m, report.pairwise);

    let path = tmp.path().join("js0.csv");
    io::write_table(&path, &io::js0_table(&report)).unwrap();
    let t = Table::read(&path).unwrap();
    assert_eq!(t.f64_column("js0", &path).unwrap(), vec![report.js0]);
    assert_eq!(t.rows[0][1], "none");
}

#[test]
fn matrix_and_dataset_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let m = DenseSymmetric::random_gaussian(7, &mut rng);
    let path = tmp.path().join("m.csv");
    io::write_table(&path, &io::matrix_table(&m)).unwrap();
    assert_eq!(io::read_matrix(&path, 0.0).unwrap(), m);

    let data = Dataset::two_blobs(30, 3, 2.0, 4).unwrap();
    let path = tmp.path().join("data.csv");
    io::write_table(&path, &io::dataset_table(&data)).unwrap();
    let back = io::read_dataset(&path).unwrap();
    assert_eq!(back.xs, data.xs);
    assert_eq!(back.ys, data.ys);
}

#[test]
fn trajectory_and_factorization_tables() {
    let p = quadlab::make_case(Case::Three, 0, None).unwrap();
    let t = quadlab::gd_run(&p, None, &p.gaussian_init(1), &RunOptions::new(50, 0.0)).unwrap();
    let table = io::trajectory_table(&t);
    let back = Table::parse(&table.to_csv(), Path::new("traj.csv")).unwrap();
    assert_eq!(back.f64_column("loss_ratio", Path::new("traj.csv")).unwrap(), t.loss_ratios);

    let a = p.hessian().to_dense();
    let v0 = slq::rademacher_probe(9, 0, 0);
    let f = slq::lanczos(&a, &v0, 5, true).unwrap();
    let table = io::factorization_table(&f);
    assert_eq!(table.header, vec!["alpha", "beta"]);
    assert_eq!(table.rows.len(), 5);
    assert!(table.rows[4][1].is_empty());
}

#[test]
fn malformed_csv_is_a_parse_error() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("bad.csv");
    std::fs::write(&path, "t,density\n0.0,1.0\n0.5,abc\n").unwrap();
    let err = io::read_density(&path).unwrap_err();
    assert!(err.to_string().contains("bad.csv"), "{err}");

    std::fs::write(&path, "c0,c1\n1,2\n3,4\n").unwrap();
    assert!(io::read_matrix(&path, 1e-9).is_err());
}

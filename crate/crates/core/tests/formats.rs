use flowbench::data::{load_csv, read_csv, write_csv};
use flowbench::numeric::standard_normal_sample;
use flowbench::scoring::{rank_table, AurocMatrix, DEFAULT_FAIL_THRESHOLD};
use flowbench::{Error, Rng};

#[test]
fn dataset_csv_round_trip_is_exact() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.csv");
    let x = standard_normal_sample(&mut Rng::new(1), 25, 3);
    let labels: Vec<u8> = (0..25).map(|i| u8::from(i % 5 == 0)).collect();
    let mut buf = Vec::new();
    write_csv(&mut buf, &x, Some(&labels), "label").unwrap();
    std::fs::write(&path, buf).unwrap();
    let ds = load_csv(&path, "label").unwrap();
    assert_eq!(ds.labels, labels);
    for i in 0..25 {
        assert_eq!(ds.features.row(i), x.row(i));
    }
}

#[test]
fn parse_errors_name_row_and_column() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.csv");
    std::fs::write(&path, "a,b,label\n1,2,0\n3,oops,1\n").unwrap();
    match read_csv(&path, "label") {
        Err(Error::ParseError { row, col, .. }) => assert_eq!((row, col), (2, 2)),
        other => panic!("expected a parse error, got {other:?}"),
    }
    std::fs::write(&path, "a,b\n1,2\n").unwrap();
    assert!(matches!(load_csv(&path, "label"), Err(Error::MissingLabelColumn(_))));
    let (x, labels) = read_csv(&path, "label").unwrap();
    assert_eq!((x.rows(), x.cols(), labels), (1, 2, None));
}

#[test]
fn auroc_matrix_rejects_gaps() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.csv");
    std::fs::write(&path, "dataset,A,B\nd1,0.9,0.8\nd2,0.7,\n").unwrap();
    let gappy = AurocMatrix::read_csv(&path).unwrap();
    assert!(gappy.values[1][1].is_nan());
    assert!(matches!(rank_table(&gappy, DEFAULT_FAIL_THRESHOLD), Err(Error::IncompleteMatrix(_))));
    std::fs::write(&path, "dataset,A,B\nd1,0.9,0.8\nd2,0.7,0.75\n").unwrap();
    let m = AurocMatrix::read_csv(&path).unwrap();
    assert_eq!(m.model_means(), vec![0.8, 0.775]);
}

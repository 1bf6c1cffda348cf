//! Golden files pinning the on-disk formats.

use std::path::Path;

use proptest::prelude::*;

use sbd::matrix_io::{from_binary, from_csv, read_matrix, to_binary, to_csv, write_matrix, MatrixData};
use sbd::output::TraceTable;

const GOLDEN_CSV: &str = "# 2 3\n1.0,-0.5,NaN\n2.0,1e-300,3.25\n";

fn golden_matrix() -> MatrixData {
    MatrixData::new(2, 3, vec![1.0, 2.0, -0.5, 1e-300, f64::NAN, 3.25])
}

fn same(a: &MatrixData, b: &MatrixData) -> bool {
    a.rows == b.rows && a.cols == b.cols && a.data.iter().zip(&b.data).all(|(x, y)| x.to_bits() == y.to_bits())
}

#[test]
fn csv_golden() {
    assert_eq!(to_csv(&golden_matrix()), GOLDEN_CSV);
    assert!(same(&from_csv(GOLDEN_CSV, Path::new("g.csv")).unwrap(), &golden_matrix()));
}

#[test]
fn binary_golden() {
    let m = MatrixData::new(1, 2, vec![1.0, -2.0]);
    let mut want = b"SBD1".to_vec();
    want.extend_from_slice(&[1, 0, 0, 0, 0, 0, 0, 0]);
    want.extend_from_slice(&[2, 0, 0, 0, 0, 0, 0, 0]);
    want.extend_from_slice(&[0, 0, 0, 0, 0, 0, 0xf0, 0x3f]);
    want.extend_from_slice(&[0, 0, 0, 0, 0, 0, 0, 0xc0]);
    assert_eq!(to_binary(&m), want);
    assert_eq!(from_binary(&want, Path::new("g.bin")).unwrap(), m);
}

#[test]
fn trace_golden() {
    let text = "omega_0,omega_1\n0.5,-1.0\n0.25,2.0\n";
    let t = TraceTable::parse(text, Path::new("omega.csv")).unwrap();
    assert_eq!(t.names, ["omega_0", "omega_1"]);
    assert_eq!(t.column(1), [-1.0, 2.0]);
    assert_eq!(t.to_csv(), text);
}

#[test]
fn malformed_inputs_are_rejected() {
    let p = Path::new("bad.csv");
    assert!(from_csv("1,2\n", p).is_err());
    assert!(from_csv("# 2 2\n1,2\n", p).is_err());
    assert!(from_csv("# 1 2\n1,x\n", p).is_err());
    assert!(from_binary(b"SBD0", Path::new("bad.bin")).is_err());
    assert!(TraceTable::parse("a,b\n1\n", p).is_err());
}

#[test]
fn files_round_trip_by_extension() {
    let tmp = tempfile::tempdir().unwrap();
    for name in ["m.csv", "m.bin"] {
        let path = tmp.path().join(name);
        write_matrix(&path, &golden_matrix()).unwrap();
        assert!(same(&read_matrix(&path).unwrap(), &golden_matrix()), "{name}");
    }
}

proptest! {
    #[test]
    fn csv_and_binary_are_lossless(rows in 1usize..6, cols in 1usize..6, seed in any::<u64>()) {
        let data: Vec<f64> = (0..rows * cols)
            .map(|i| f64::from_bits(seed.rotate_left(i as u32 * 7) ^ (i as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15)))
            .map(|v| if v.is_finite() { v } else { 0.5 })
            .collect();
        let m = MatrixData::new(rows, cols, data);
        prop_assert!(same(&from_csv(&to_csv(&m), Path::new("p.csv")).unwrap(), &m));
        prop_assert!(same(&from_binary(&to_binary(&m), Path::new("p.bin")).unwrap(), &m));
    }
}

mod common;

use std::sync::Arc;

use smforge_core::circuit::{load_touchstone, write_touchstone, DesignVector, FilterGeometry, TouchstoneSequence};
use smforge_core::{DesignModel, EvalCounter};

#[test]
fn emitted_response_reloads_identically() {
    let counter = Arc::new(EvalCounter::new());
    let coarse = common::coarse(&counter);
    let grid = common::grid();
    let r = coarse
        .eval(
            &DesignVector::reference(),
            &FilterGeometry::default().nominal_aux(),
            &grid,
        )
        .unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("x0.s2p");
    write_touchstone(&r, 50.0, &path).unwrap();
    let back = load_touchstone(&path).unwrap();
    assert!(back.grid().same_as(&grid));
    for ch in smforge_core::Channel::ALL {
        for (a, b) in back.channel(ch).iter().zip(r.channel(ch)) {
            assert!((a - b).norm() <= 1e-12);
        }
    }
}

#[test]
fn sequence_serves_files_in_order_and_counts() {
    let counter = Arc::new(EvalCounter::new());
    let coarse = common::coarse(&counter);
    let grid = common::grid();
    let aux = FilterGeometry::default().nominal_aux();
    let dir = tempfile::tempdir().unwrap();
    let mut expected = Vec::new();
    for k in 0..2 {
        let mut v = DesignVector::reference().as_slice().to_vec();
        v[1] += 0.05 * k as f64;
        let r = coarse
            .eval(&DesignVector::from_slice(&v).unwrap(), &aux, &grid)
            .unwrap();
        write_touchstone(&r, 50.0, &dir.path().join(TouchstoneSequence::file_name(k))).unwrap();
        expected.push((v, r));
    }
    let fine_counter = Arc::new(EvalCounter::new());
    let seq = TouchstoneSequence::new(dir.path(), fine_counter.clone()).unwrap();
    for (v, r) in &expected {
        let got = seq.evaluate(v, &grid).unwrap();
        assert!((got.s21()[8] - r.s21()[8]).norm() <= 1e-12);
    }
    assert_eq!(fine_counter.fine_evals(), 2);
    assert!(seq.evaluate(&expected[0].0, &grid).is_err());
}

//! Black-box tests of the `seprank` binary: file round-trips, deterministic
//! certificate output, and the exit-code contract.

use std::collections::BTreeMap;
use std::path::Path;
use std::process::{Command, Output};

use seprank::apps::{ChannelRep, NonnegMatrix};
use seprank::io;
use seprank::linalg::{CMat, C64, ONE, ZERO};

fn seprank(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_seprank"))
        .args(args)
        .env_remove("SEPRANK_TOL_PROFILE")
        .output()
        .expect("binary runs")
}

fn exit_code(out: &Output) -> i32 {
    out.status.code().expect("no exit code")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn sigma_x() -> CMat {
    CMat::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO])
}

/// ½(I⊗I + σx⊗σx), the standard rank-2 separable fixture.
fn x_correlated_pair() -> CMat {
    let id = CMat::identity(2, 2);
    let x = sigma_x();
    (id.kronecker(&id) + x.kronecker(&x)) * C64::new(0.5, 0.0)
}

fn write_dense(path: &Path, rho: &CMat, dims: &[usize]) {
    io::save(path, &io::dense_state_file(rho, dims, BTreeMap::new())).unwrap();
}

#[test]
fn separate_certify_round_trip_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let state = dir.path().join("state.json");
    let cert1 = dir.path().join("cert1.json");
    let cert2 = dir.path().join("cert2.json");
    write_dense(&state, &x_correlated_pair(), &[2, 2]);

    let out = seprank(&[
        "separate",
        "--input",
        state.to_str().unwrap(),
        "--output",
        cert1.to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&out), 0, "stderr: {}", stderr(&out));
    assert!(stdout(&out).contains("residual"));

    // the certificate file parses back into a passing certificate
    let cert = io::certificate_from_file(&io::load(&cert1).unwrap()).unwrap();
    assert!(cert.residual <= 1e-8);

    // a second run produces byte-identical output
    let out = seprank(&[
        "separate",
        "--input",
        state.to_str().unwrap(),
        "--output",
        cert2.to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&out), 0);
    assert_eq!(
        std::fs::read(&cert1).unwrap(),
        std::fs::read(&cert2).unwrap(),
        "certificate output is not deterministic"
    );

    let out = seprank(&[
        "certify",
        "--state",
        state.to_str().unwrap(),
        "--cert",
        cert1.to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&out), 0, "stderr: {}", stderr(&out));
    assert!(stdout(&out).contains("PASS"));
}

#[test]
fn certify_against_wrong_state_fails_with_code_1() {
    let dir = tempfile::tempdir().unwrap();
    let state = dir.path().join("state.json");
    let other = dir.path().join("other.json");
    let cert = dir.path().join("cert.json");
    write_dense(&state, &x_correlated_pair(), &[2, 2]);
    // a different separable state: maximally mixed
    write_dense(&other, &(CMat::identity(4, 4) * C64::new(0.25, 0.0)), &[2, 2]);

    let out = seprank(&[
        "separate",
        "--input",
        state.to_str().unwrap(),
        "--output",
        cert.to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&out), 0);

    let out = seprank(&[
        "certify",
        "--state",
        other.to_str().unwrap(),
        "--cert",
        cert.to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&out), 1);
    assert!(stdout(&out).contains("FAIL"));
}

#[test]
fn malformed_input_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{ not json").unwrap();
    let out = seprank(&["separate", "--input", bad.to_str().unwrap()]);
    assert_eq!(exit_code(&out), 2);

    let missing = dir.path().join("missing.json");
    let out = seprank(&["separate", "--input", missing.to_str().unwrap()]);
    assert_eq!(exit_code(&out), 2);
}

#[test]
fn dimension_mismatch_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let state = dir.path().join("state.json");
    write_dense(&state, &x_correlated_pair(), &[2, 2]);
    let out = seprank(&[
        "separate",
        "--input",
        state.to_str().unwrap(),
        "--dims",
        "3,2",
    ]);
    assert_eq!(exit_code(&out), 3);
}

#[test]
fn rank_three_state_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let state = dir.path().join("state.json");
    // symmetric 3×2 separable state with operator Schmidt rank three
    let p1 = CMat::identity(3, 3);
    let p2 = CMat::from_fn(3, 3, |i, j| {
        if (i, j) == (0, 1) || (i, j) == (1, 0) { ONE } else { ZERO }
    });
    let p3 = CMat::from_fn(3, 3, |i, j| {
        if (i, j) == (0, 2) || (i, j) == (2, 0) { ONE } else { ZERO }
    });
    let q1 = CMat::identity(2, 2);
    let q2 = CMat::from_fn(2, 2, |i, j| {
        if (i, j) == (0, 0) { C64::new(0.5, 0.0) } else { ZERO }
    });
    let q3 = sigma_x() * C64::new(0.75, 0.0);
    let rho = p1.kronecker(&q1) + p2.kronecker(&q2) + p3.kronecker(&q3);
    write_dense(&state, &rho, &[3, 2]);

    let out = seprank(&["separate", "--input", state.to_str().unwrap()]);
    assert_eq!(exit_code(&out), 4);
    assert!(stderr(&out).contains("operator Schmidt rank 3"));
}

#[test]
fn non_psd_state_exits_5() {
    let dir = tempfile::tempdir().unwrap();
    let state = dir.path().join("state.json");
    let mut rho = CMat::identity(4, 4);
    rho[(3, 3)] = C64::new(-1.0, 0.0);
    write_dense(&state, &rho, &[2, 2]);
    let out = seprank(&["separate", "--input", state.to_str().unwrap()]);
    assert_eq!(exit_code(&out), 5);
}

#[test]
fn schmidt_and_ranks_commands() {
    let dir = tempfile::tempdir().unwrap();
    let state = dir.path().join("state.json");
    let dec = dir.path().join("dec.json");
    write_dense(&state, &x_correlated_pair(), &[2, 2]);

    let out = seprank(&[
        "schmidt",
        "--input",
        state.to_str().unwrap(),
        "--output",
        dec.to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&out), 0, "stderr: {}", stderr(&out));
    assert!(stdout(&out).contains("osr = 2"));
    let cores = io::mpdo_from_file(&io::load(&dec).unwrap()).unwrap();
    assert_eq!(cores.bond_dims, vec![2]);

    let out = seprank(&["ranks", "--input", state.to_str().unwrap()]);
    assert_eq!(exit_code(&out), 0);
    let text = stdout(&out);
    assert!(text.contains("osr per cut = [2]"));
    assert!(text.contains("rank checks pass = true"));
}

#[test]
fn channel_eb_command() {
    let dir = tempfile::tempdir().unwrap();
    let chan = dir.path().join("chan.json");
    let choi = dir.path().join("choi.json");
    let cert = dir.path().join("cert.json");

    // E(X) = ½(tr(X)·I + tr(σx X)·σx) is entanglement breaking
    let id = CMat::identity(2, 2);
    let x = sigma_x();
    let ch = ChannelRep::new(
        2,
        2,
        vec![
            (&id * C64::new(0.5, 0.0), id.clone()),
            (&x * C64::new(0.5, 0.0), x.clone()),
        ],
    )
    .unwrap();
    io::save(&chan, &io::channel_file(&ch, BTreeMap::new())).unwrap();
    let out = seprank(&[
        "channel-eb",
        "--input",
        chan.to_str().unwrap(),
        "--choi-out",
        choi.to_str().unwrap(),
        "--cert-out",
        cert.to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&out), 0, "stderr: {}", stderr(&out));
    assert!(stdout(&out).contains("EB"));
    assert!(choi.exists() && cert.exists());

    // the transpose map is positive but not completely positive
    let e = |i: usize, j: usize| CMat::from_fn(2, 2, |r, c| if (r, c) == (i, j) { ONE } else { ZERO });
    let mut terms = Vec::new();
    for i in 0..2 {
        for j in 0..2 {
            terms.push((e(i, j), e(j, i)));
        }
    }
    let tr_map = ChannelRep::new(2, 2, terms).unwrap();
    io::save(&chan, &io::channel_file(&tr_map, BTreeMap::new())).unwrap();
    let out = seprank(&["channel-eb", "--input", chan.to_str().unwrap()]);
    assert_eq!(exit_code(&out), 5);
    assert!(stdout(&out).contains("NotCP"));
}

#[test]
fn from_nonneg_command() {
    let dir = tempfile::tempdir().unwrap();
    let mat = dir.path().join("m.json");
    let state = dir.path().join("state.json");

    // rank-2 nonnegative matrix
    let m = NonnegMatrix::new(2, 3, vec![2.0, 1.0, 1.0, 1.0, 1.0, 2.0]).unwrap();
    io::save(&mat, &io::nonneg_file(&m, BTreeMap::new())).unwrap();
    let out = seprank(&[
        "from-nonneg",
        "--input",
        mat.to_str().unwrap(),
        "--state-out",
        state.to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&out), 0, "stderr: {}", stderr(&out));
    assert!(stdout(&out).contains("rank"));
    let (rho, dims) = io::dense_from_file(&io::load(&state).unwrap()).unwrap();
    assert_eq!(dims, vec![2, 3]);
    assert_eq!(rho.nrows(), 6);

    // rank-1 matrix: the diagonal state is still written, factorization skipped
    let m = NonnegMatrix::new(2, 2, vec![1.0, 2.0, 2.0, 4.0]).unwrap();
    io::save(&mat, &io::nonneg_file(&m, BTreeMap::new())).unwrap();
    let out = seprank(&[
        "from-nonneg",
        "--input",
        mat.to_str().unwrap(),
        "--state-out",
        state.to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&out), 4);
    assert!(state.exists());
}

#[test]
fn tolerance_profile_env_is_honored() {
    let dir = tempfile::tempdir().unwrap();
    let state = dir.path().join("state.json");
    let cert = dir.path().join("cert.json");
    write_dense(&state, &x_correlated_pair(), &[2, 2]);
    let out = Command::new(env!("CARGO_BIN_EXE_seprank"))
        .args([
            "separate",
            "--input",
            state.to_str().unwrap(),
            "--output",
            cert.to_str().unwrap(),
        ])
        .env("SEPRANK_TOL_PROFILE", "strict")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let cert = io::certificate_from_file(&io::load(&cert).unwrap()).unwrap();
    assert_eq!(cert.tolerances.cert_tol, 1e-10);
}

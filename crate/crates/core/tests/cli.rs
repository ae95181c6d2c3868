use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use m2m_core::calibrate::{load_tf, Direction};
use m2m_core::experiment::{all_paths, parse_report, CSV_HEADER, MATRIX_FILES};

const TINY: &str = "\
data_dir = data
train_frames_per_class = 2
test_frames_per_class = 2
stable_frames = 1
freehand_frames = 2
n_repetitions = 2
epochs = 1
hidden = 4
batch_size = 64
";

fn m2m(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_m2m"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("m2m binary runs")
}

fn ok(out: &Output) -> String {
    assert!(
        out.status.success(),
        "exit {:?}, stderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn setup() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("m2m.cfg"), TINY).unwrap();
    ok(&m2m(&["simulate", "--config", "m2m.cfg", "--out", "data"], dir.path()));
    dir
}

#[test]
fn simulate_writes_the_full_suite_deterministically() {
    let dir = setup();
    let expected = all_paths(&dir.path().join("data"));
    assert_eq!(expected.len(), 12);
    for p in &expected {
        assert!(p.is_file(), "{} missing", p.display());
    }
    ok(&m2m(&["simulate", "--config", "m2m.cfg", "--out", "again"], dir.path()));
    for (a, b) in expected.iter().zip(all_paths(&dir.path().join("again"))) {
        assert_eq!(fs::read(a).unwrap(), fs::read(&b).unwrap(), "{}", a.display());
    }
    ok(&m2m(&["simulate", "--config", "m2m.cfg", "--out", "other", "--seed", "5"], dir.path()));
    let first = &expected[0];
    let other = dir.path().join("other").join(first.file_name().unwrap());
    assert_ne!(fs::read(first).unwrap(), fs::read(other).unwrap());
}

#[test]
fn experiment_calibrate_and_report() {
    let dir = setup();
    let stdout = ok(&m2m(
        &["experiment", "--config", "m2m.cfg", "--mode", "TrainTime", "--stats", "TestStats", "--reps", "1"],
        dir.path(),
    ));
    let rows = parse_report(&stdout).unwrap();
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0].report.n_repetitions, 1);
    assert!(stdout.starts_with(CSV_HEADER));

    ok(&m2m(
        &["calibrate", "--config", "m2m.cfg", "--mode", "TestTime", "--acquisition", "FreeHand", "--out", "inv.m2mtf"],
        dir.path(),
    ));
    let tf = load_tf(dir.path().join("inv.m2mtf")).unwrap();
    assert_eq!(tf.direction, Direction::Inverse);
    assert_eq!(tf.n_segments(), 9);

    ok(&m2m(&["matrix", "--config", "m2m.cfg", "--out", "out", "--reps", "1"], dir.path()));
    for name in MATRIX_FILES {
        assert!(dir.path().join("out").join(name).is_file());
    }
    let table = ok(&m2m(&["report", "--out", "out"], dir.path()));
    assert!(table.contains("TrainTime"));
}

#[test]
fn failures_exit_nonzero_with_one_line() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("m2m.cfg"), TINY).unwrap();
    let out = m2m(&["experiment", "--config", "m2m.cfg", "--mode", "None", "--stats", "TrainStats"], dir.path());
    assert!(!out.status.success());
    let err = String::from_utf8(out.stderr).unwrap();
    assert_eq!(err.trim_end().lines().count(), 1, "{err}");
    assert!(err.contains("class_train_a.m2mrf"), "{err}");

    let out = m2m(&["experiment", "--config", "m2m.cfg", "--mode", "Sideways", "--stats", "TrainStats"], dir.path());
    assert!(!out.status.success());
    assert!(String::from_utf8(out.stderr).unwrap().contains("Sideways"));

    let out = m2m(&["simulate", "--config", "absent.cfg", "--out", "x"], dir.path());
    assert!(!out.status.success());

    let out = m2m(&["calibrate", "--config", "m2m.cfg", "--mode", "None", "--out", "t.m2mtf"], dir.path());
    assert!(!out.status.success());
}

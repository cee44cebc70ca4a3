use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn surriga(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_surriga"))
        .args(args)
        .current_dir(dir)
        .env_remove("SURRIGA_THREADS")
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write(dir: &Path, name: &str, text: &str) {
    fs::write(dir.join(name), text).unwrap();
}

#[test]
fn valid_config_runs_and_echoes() {
    let d = tempfile::tempdir().unwrap();
    write(d.path(), "a.cfg", "problem=poisson\np=2\nq=3\nM=5\ngeometry=quarter_annulus\nladder = 12, 16\n");
    let o = surriga(&["run", "a.cfg", "-o", "res"], d.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let echo = fs::read_to_string(d.path().join("res/config.txt")).unwrap();
    assert!(echo.contains("geometry = quarter_annulus"));
    assert!(echo.contains("M = 5"));
    let csv = fs::read_to_string(d.path().join("res/errors.csv")).unwrap();
    let lines: Vec<_> = csv.lines().collect();
    assert!(lines[0].starts_with("N,h,p,q,M,H,err_l2_std,err_l2_surr,err_h1_std,err_h1_surr"));
    assert_eq!(lines.len(), 3);
}

#[test]
fn zero_sampling_distance_is_a_validation_error() {
    let d = tempfile::tempdir().unwrap();
    write(d.path(), "a.cfg", "# bad\nM = 0\n");
    let o = surriga(&["run", "a.cfg"], d.path());
    assert_eq!(o.status.code(), Some(2));
    let e = stderr(&o);
    assert!(e.contains("M ≥ 1"), "{e}");
    assert!(e.contains("a.cfg:2"), "{e}");
    assert!(!d.path().join("out").exists());
}

#[test]
fn unknown_keys_and_type_mismatches_cite_their_origin() {
    let d = tempfile::tempdir().unwrap();
    write(d.path(), "a.cfg", "q = 3\nsmoothness = 2\n");
    let o = surriga(&["run", "a.cfg"], d.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("a.cfg:2: unknown key `smoothness`"), "{}", stderr(&o));
    write(d.path(), "b.cfg", "q = 3\n");
    let o = surriga(&["run", "b.cfg", "--q", "three"], d.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("flag --q"), "{}", stderr(&o));
    let o = surriga(&["run", "b.cfg", "--set", "c=3", "--p", "3"], d.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("q > p"), "{}", stderr(&o));
}

#[test]
fn flags_override_the_file() {
    let d = tempfile::tempdir().unwrap();
    write(d.path(), "a.cfg", "q = 3\nladder = 12\n");
    let o = surriga(&["run", "a.cfg", "--q", "5", "--set", "output=flagged"], d.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let echo = fs::read_to_string(d.path().join("flagged/config.txt")).unwrap();
    assert!(echo.contains("q = 5\n"), "{echo}");
    let csv = fs::read_to_string(d.path().join("flagged/errors.csv")).unwrap();
    assert_eq!(csv.lines().nth(1).unwrap().split(',').nth(3), Some("5"));
}

#[test]
fn coarse_level_runs_in_fallback_mode() {
    let d = tempfile::tempdir().unwrap();
    write(d.path(), "a.cfg", "p = 2\nladder = 6, 16\n");
    let o = surriga(&["run", "a.cfg"], d.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(d.path().join("out/errors.csv")).unwrap();
    let rows: Vec<_> = csv.lines().skip(1).collect();
    assert!(rows[0].ends_with("surrogate=disabled"), "{csv}");
    assert!(!rows[1].contains("surrogate=disabled"), "{csv}");
}

#[test]
fn bench_tables_keep_their_column_count() {
    let d = tempfile::tempdir().unwrap();
    write(d.path(), "a.cfg", "problem = bench
ladder = 32
count_ladder = 64
");
    let o = surriga(&["run", "a.cfg"], d.path());
    assert!(o.status.success(), "{}", stderr(&o));
    for name in ["timing.csv", "counts.csv"] {
        let csv = fs::read_to_string(d.path().join("out").join(name)).unwrap();
        let width = csv.lines().next().unwrap().split(',').count();
        assert!(csv.lines().all(|l| l.split(',').count() == width), "{csv}");
    }
}

#[test]
fn bench_matrices_are_byte_identical_across_runs() {
    let d = tempfile::tempdir().unwrap();
    write(d.path(), "a.cfg", "problem = bench\nladder = 24\nseed = 7\nthreads = 1\n");
    for out in ["one", "two"] {
        let o = surriga(&["assemble", "a.cfg", "-o", out], d.path());
        assert!(o.status.success(), "{}", stderr(&o));
    }
    for name in ["s24_stiffness_std.mtx", "s24_stiffness_surr.mtx"] {
        let a = fs::read(d.path().join("one").join(name)).unwrap();
        let b = fs::read(d.path().join("two").join(name)).unwrap();
        assert!(a.starts_with(b"%%MatrixMarket matrix coordinate real"));
        assert_eq!(a, b, "{name}");
    }
}

#[test]
fn thread_count_falls_back_to_the_environment() {
    let d = tempfile::tempdir().unwrap();
    write(d.path(), "a.cfg", "ladder = 12\n");
    let o = Command::new(env!("CARGO_BIN_EXE_surriga"))
        .args(["assemble", "a.cfg"])
        .current_dir(d.path())
        .env("SURRIGA_THREADS", "2")
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    let echo = fs::read_to_string(d.path().join("out/config.txt")).unwrap();
    assert!(echo.contains("threads = 2"), "{echo}");
}

#[test]
fn report_merges_tables_by_name() {
    let d = tempfile::tempdir().unwrap();
    for (sub, row) in [("a", "1,2"), ("b", "3,4")] {
        fs::create_dir(d.path().join(sub)).unwrap();
        write(&d.path().join(sub), "errors.csv", &format!("x,y\n{row}\n"));
    }
    let o = surriga(&["report", "."], d.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let merged = fs::read_to_string(d.path().join("report/errors.csv")).unwrap();
    assert_eq!(merged, "source,x,y\na,1,2\nb,3,4\n");
    // merging again ignores its own output
    let o = surriga(&["report", "."], d.path());
    assert!(o.status.success());
    assert_eq!(fs::read_to_string(d.path().join("report/errors.csv")).unwrap(), merged);

    write(&d.path().join("b"), "errors.csv", "x,z\n5,6\n");
    let o = surriga(&["report", "."], d.path());
    assert_eq!(o.status.code(), Some(2));
}

use std::path::Path;
use std::process::{Command, Output};

const QUICK: &str = "\
scene.preset = uturn-car
radar.num_slow = 32
radar.num_fast = 64
radar.t_pri_s = 0.0010416666666666667
pipeline.frames = 8.4s
pipeline.blank_frames = 2
pipeline.em_velocities = -0.5, 0, 0.5
pipeline.em_accels = 0
pipeline.ccr_max_iters = 5
";

fn bin(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mimo-isar"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn quick_config(dir: &Path) -> String {
    let path = dir.join("quick.conf");
    std::fs::write(&path, QUICK).unwrap();
    path.display().to_string()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn formats_lists_layouts() {
    let tmp = tempfile::tempdir().unwrap();
    let o = bin(&["formats"], tmp.path());
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stdout).contains("ISARCUBE"));
}

#[test]
fn bad_arguments_exit_with_config_code() {
    let tmp = tempfile::tempdir().unwrap();
    let o = bin(&["metrics", "--algo", "bogus"], tmp.path());
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(stderr(&o).contains("--algo"));

    let cfg = tmp.path().join("bad.conf");
    std::fs::write(&cfg, "scene.preset = blank\n\nradar.num_tx = -1\n").unwrap();
    let o = bin(&["metrics", "--config", cfg.to_str().unwrap()], tmp.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 3"), "{}", stderr(&o));
}

#[test]
fn missing_or_corrupt_files_exit_with_io_code() {
    let tmp = tempfile::tempdir().unwrap();
    let o = bin(&["run", "--config", "nowhere.conf"], tmp.path());
    assert_eq!(o.status.code(), Some(3));

    let cube = tmp.path().join("junk.cube");
    std::fs::write(&cube, b"ISARCUBE\x01\x00short").unwrap();
    let o = bin(&["image", "--input", cube.to_str().unwrap()], tmp.path());
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
}

#[test]
fn simulate_mocomp_image_chain() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = quick_config(tmp.path());
    let o = bin(&["simulate", "--config", &cfg, "--out", "sim"], tmp.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let cube = tmp.path().join("sim/target_f0084.cube");
    assert!(cube.exists());

    let o = bin(
        &[
            "mocomp",
            "--config",
            &cfg,
            "--algo",
            "ccr",
            "--input",
            cube.to_str().unwrap(),
            "--out",
            "comp",
        ],
        tmp.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let log = String::from_utf8_lossy(&o.stdout);
    assert_eq!(log.lines().filter(|l| l.contains(" tx")).count(), 12, "{log}");
    let comp = tmp.path().join("comp/target_f0084_ccr.cube");
    assert!(comp.exists());

    let o = bin(
        &[
            "image",
            "--config",
            &cfg,
            "--input",
            comp.to_str().unwrap(),
            "--out",
            "img",
        ],
        tmp.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    for f in [
        "target_f0084_ccr_siso.pgm",
        "target_f0084_ccr_mimo.csv",
        "target_f0084_ccr_mimo.axes.txt",
    ] {
        assert!(tmp.path().join("img").join(f).exists(), "{f}");
    }

    // a cube from other radar parameters is refused
    let o = bin(&["image", "--input", cube.to_str().unwrap()], tmp.path());
    assert!(!o.status.success());
}

#[test]
fn metrics_prints_both_arrays() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = quick_config(tmp.path());
    let o = bin(
        &["metrics", "--config", &cfg, "--algo", "pga", "--threads", "2"],
        tmp.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let report = String::from_utf8_lossy(&o.stdout);
    assert!(report.contains("SISO") && report.contains("MIMO"), "{report}");
}

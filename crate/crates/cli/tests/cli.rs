use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn proptrack(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_proptrack"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = proptrack(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn code(dir: &Path, args: &[&str]) -> i32 {
    proptrack(dir, args).status.code().expect("exit code")
}

/// Small three-object sequence with an occlusion on object 2.
fn synth(dir: &Path) {
    ok(
        dir,
        &[
            "synth", "--out", "s", "--num-frames", "12", "--width", "160", "--height", "120",
            "--size", "24x16", "--objects", "3", "--occlude", "2:5-7",
        ],
    );
}

fn report_value(report: &str, key: &str) -> String {
    report
        .lines()
        .find_map(|l| l.strip_prefix(&format!("{key}=")))
        .unwrap_or_else(|| panic!("no {key} in {report}"))
        .to_string()
}

#[test]
fn synth_writes_the_expected_layout() {
    let t = tempfile::tempdir().unwrap();
    synth(t.path());
    let s = t.path().join("s");
    assert_eq!(fs::read_dir(s.join("frames")).unwrap().count(), 12);
    assert_eq!(fs::read_dir(s.join("masks")).unwrap().count(), 12);
    let gt = fs::read_to_string(s.join("gt.txt")).unwrap();
    // 3 objects x 12 frames minus 3 hidden frames
    assert_eq!(gt.lines().count(), 33);
    assert!(gt.lines().all(|l| l.ends_with(",-1,-1,-1")));
    let det = fs::read_to_string(s.join("det.txt")).unwrap();
    assert!(det.lines().all(|l| l.split(',').nth(1) == Some("-1")));
}

#[test]
fn mot_then_eval_is_perfect_and_deterministic() {
    let t = tempfile::tempdir().unwrap();
    let d = t.path();
    synth(d);
    for sim in ["rsm", "cf"] {
        let args = [
            "mot", "--frames", "s/frames", "--dets", "s/det.txt", "--out", "r1.txt",
            "--similarity", sim, "--fps", "25",
        ];
        ok(d, &args);
        let mut again = args;
        again[6] = "r2.txt";
        ok(d, &again);
        let a = fs::read(d.join("r1.txt")).unwrap();
        assert_eq!(a, fs::read(d.join("r2.txt")).unwrap(), "{sim}");

        let report = ok(d, &["eval", "--gt", "s/gt.txt", "--pred", "r1.txt"]);
        assert_eq!(report_value(&report, "IDF1"), "1.000000", "{sim}: {report}");
        assert_eq!(report_value(&report, "MOTA"), "1.000000", "{sim}: {report}");
        assert_eq!(report_value(&report, "IDs"), "0", "{sim}: {report}");
    }
}

#[test]
fn mot_without_motion_runs() {
    let t = tempfile::tempdir().unwrap();
    let d = t.path();
    synth(d);
    ok(
        d,
        &["mot", "--frames", "s/frames", "--dets", "s/det.txt", "--out", "r.txt", "--no-motion"],
    );
    let text = fs::read_to_string(d.join("r.txt")).unwrap();
    let first = text.lines().next().unwrap();
    assert_eq!(first.split(',').count(), 10);
    assert!(first.starts_with("1,"));
}

#[test]
fn mots_writes_id_masks() {
    let t = tempfile::tempdir().unwrap();
    let d = t.path();
    synth(d);
    ok(
        d,
        &[
            "mots", "--frames", "s/frames", "--det-masks", "s/det_masks", "--out", "r.txt",
            "--out-masks", "rm",
        ],
    );
    let report = ok(d, &["eval", "--gt-masks", "s/masks", "--pred-masks", "rm"]);
    assert_eq!(report_value(&report, "IDs"), "0", "{report}");
    assert_eq!(report_value(&report, "IDF1"), "1.000000", "{report}");
}

#[test]
fn sot_writes_one_line_per_frame() {
    let t = tempfile::tempdir().unwrap();
    let d = t.path();
    synth(d);
    let init = fs::read_to_string(d.join("s/init.txt")).unwrap();
    ok(
        d,
        &["sot", "--frames", "s/frames", "--init", init.trim(), "--head", "xcorr", "--out", "res.txt"],
    );
    let res = fs::read_to_string(d.join("res.txt")).unwrap();
    assert_eq!(res.lines().count(), 12);
    assert_eq!(res.lines().next().unwrap(), init.trim());
    for line in res.lines() {
        assert_eq!(line.split(',').count(), 4);
    }
}

#[test]
fn vos_and_poseprop_cover_every_frame() {
    let t = tempfile::tempdir().unwrap();
    let d = t.path();
    synth(d);
    let small = ["--set", "labelprop.mask_size=120x160", "--set", "labelprop.pose_size=120x160"];
    let mut args = vec!["vos", "--frames", "s/frames", "--init-mask", "s/masks/00001.png", "--out", "v"];
    args.extend(small);
    ok(d, &args);
    assert_eq!(fs::read_dir(d.join("v")).unwrap().count(), 12);

    fs::write(d.join("pose.txt"), "1,0,30,30,1\n1,1,50,30,1\n1,2,40,40,1\n").unwrap();
    let mut args = vec!["poseprop", "--frames", "s/frames", "--init-pose", "pose.txt", "--out", "p.txt"];
    args.extend(small);
    ok(d, &args);
    let table = fs::read_to_string(d.join("p.txt")).unwrap();
    assert_eq!(table.lines().count(), 36);
    assert!(table.starts_with("1,0,30.00,30.00,1\n"));
}

#[test]
fn config_file_and_flag_precedence() {
    let t = tempfile::tempdir().unwrap();
    let d = t.path();
    synth(d);
    fs::write(d.join("bad.cfg"), "associate.similarity = nonsense\n").unwrap();
    let base = ["mot", "--frames", "s/frames", "--dets", "s/det.txt", "--out", "r.txt"];
    let mut args = base.to_vec();
    args.extend(["--config", "bad.cfg"]);
    assert_eq!(code(d, &args), 1);
    // the flag replaces the file's value
    args.extend(["--similarity", "cf"]);
    assert_eq!(code(d, &args), 0);

    fs::write(d.join("unknown.cfg"), "associate.nonsense = 1\n").unwrap();
    let mut args = base.to_vec();
    args.extend(["--config", "unknown.cfg"]);
    assert_eq!(code(d, &args), 1);
}

#[test]
fn exit_codes() {
    let t = tempfile::tempdir().unwrap();
    let d = t.path();
    assert_eq!(code(d, &["bogus"]), 1);
    assert_eq!(code(d, &["mot", "--frames", "nowhere", "--dets", "x", "--out", "y"]), 1);
    assert_eq!(code(d, &["eval"]), 1);
    assert_eq!(code(d, &["--help"]), 0);

    // a flat frame has no feature energy, so an unregularized filter is
    // singular: a runtime failure
    fs::create_dir(d.join("flat")).unwrap();
    let flat = "P3\n8 8\n255\n".to_string() + &"90 90 90\n".repeat(64);
    for i in 1..=2 {
        fs::write(d.join(format!("flat/{i}.ppm")), &flat).unwrap();
    }
    let args = [
        "sot", "--frames", "flat", "--init", "3,3,2,2", "--out", "o.txt", "--set", "boxprop.ridge=0",
    ];
    assert_eq!(code(d, &args), 2);
}

use std::path::Path;
use std::process::Command;

fn pilotfwd() -> Command {
    Command::new(env!("CARGO_BIN_EXE_pilotfwd"))
}

fn write(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

#[test]
fn run_writes_four_csvs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "a.conf",
        "sweep = sinr\nsweep_values = 0, 5\ndrops = 50\nseed = 1\n",
    );
    let out = dir.path().join("out");
    let st = pilotfwd()
        .args(["run", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .args(["--drops", "2", "--workers", "1"])
        .output()
        .unwrap();
    assert!(
        st.status.success(),
        "{}",
        String::from_utf8_lossy(&st.stderr)
    );
    assert!(String::from_utf8_lossy(&st.stdout).contains("drops: 2 ok"));
    for f in [
        "nmse.csv",
        "nse_cdf.csv",
        "ber_vs_sinr.csv",
        "ber_vs_relnoise.csv",
    ] {
        assert!(out.join(f).is_file(), "{f}");
    }
    let ber = std::fs::read_to_string(out.join("ber_vs_sinr.csv")).unwrap();
    assert!(ber.starts_with("sinr_db,estimator,strategy,ber\n"));
    assert!(ber.contains("\n5,proposed,dedicated_midpoint,"));
    let used = std::fs::read_to_string(out.join("config.used")).unwrap();
    assert!(used.contains("drops = 2"));
}

#[test]
fn profile_file_relative_to_config() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "two.tdl", "# delay_ns power_db\n0 0\n200 -3\n");
    let cfg = write(
        dir.path(),
        "b.conf",
        "profile_file = two.tdl\nsweep = relative_noise\nsweep_values = -5\ndetection = false\ndrops = 2\nseed = 4\n",
    );
    let out = dir.path().join("o");
    let st = pilotfwd()
        .args(["run", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert!(
        st.status.success(),
        "{}",
        String::from_utf8_lossy(&st.stderr)
    );
    assert_eq!(
        std::fs::read_to_string(out.join("nmse.csv"))
            .unwrap()
            .lines()
            .count(),
        6
    );
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    for (name, text) in [
        ("unknown.conf", "bogus = 1\n"),
        ("drops.conf", "drops = 0\n"),
        ("profile.conf", "profile = tdl-z\ndrops = 1\n"),
        (
            "missing_profile.conf",
            "profile_file = nope.tdl\ndrops = 1\n",
        ),
    ] {
        let cfg = write(dir.path(), name, text);
        let st = pilotfwd()
            .args(["run", "--config"])
            .arg(&cfg)
            .arg("--out")
            .arg(&out)
            .output()
            .unwrap();
        assert_eq!(
            st.status.code(),
            Some(2),
            "{name}: {}",
            String::from_utf8_lossy(&st.stderr)
        );
    }
    let st = pilotfwd()
        .args(["run", "--config", "/nonexistent.conf", "--out"])
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(st.status.code(), Some(2));
    let st = pilotfwd()
        .args(["run", "--config"])
        .arg(write(dir.path(), "ok.conf", "drops = 1\n"))
        .arg("--out")
        .arg(&out)
        .args(["--drops", "0"])
        .output()
        .unwrap();
    assert_eq!(st.status.code(), Some(2));
}

#[test]
fn list_profiles_names_builtins() {
    let st = pilotfwd().arg("list-profiles").output().unwrap();
    assert!(st.status.success());
    let text = String::from_utf8_lossy(&st.stdout);
    for name in ["tdl-a", "tdl-b", "tdl-c", "flat"] {
        assert!(text.contains(name), "{name}");
    }
}

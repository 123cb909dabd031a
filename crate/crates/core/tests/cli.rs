use std::fs;
use std::path::Path;
use std::process::Command;

const BIN: &str = env!("CARGO_BIN_EXE_cauchy-lab");

const BASE: &str = r#"
seed = 7
[grid]
origin = -2.005
step = 0.01
count = 402
[symbol]
kind = "truncated-log"
[input]
kind = "indicator"
lo = -1.0
hi = 1.0
[eval]
lo = -3.0
hi = 3.0
stride = 4
[verify_kernel]
samples = 2000
[homogeneity]
m_ladder = [16.0, 64.0]
nodes_per_radius = 64
[lemma41]
k_ladder = [3, 4]
points_per_annulus = 64
[fk]
positions = [-0.5, 0.5]
[witness]
len = 3
r1 = 0.25
[commutator_norm]
family = [{ kind = "indicator", lo = -0.5, hi = 0.5 }, { kind = "smooth-bump", radius = 0.5 }]
"#;

const SUBCOMMANDS: [&str; 9] = [
    "eval-operator",
    "bmo-norm",
    "vmo-profile",
    "verify-kernel",
    "verify-homogeneity",
    "lemma41",
    "fk-diagnose",
    "witness",
    "commutator-norm",
];

fn write_config(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn run(args: &[&str]) -> i32 {
    let out = Command::new(BIN).args(args).output().unwrap();
    out.status.code().unwrap()
}

fn run_sub(config: &Path, out: &Path, sub: &str, extra: &[&str]) -> i32 {
    let mut args = vec!["--config", config.to_str().unwrap(), "--out-dir", out.to_str().unwrap(), sub];
    args.extend_from_slice(extra);
    run(&args)
}

fn data_rows(csv: &str) -> usize {
    csv.lines().filter(|l| !l.starts_with('#')).count() - 1
}

#[test]
fn every_subcommand_is_deterministic_and_labelled() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "base.toml", BASE);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for sub in SUBCOMMANDS {
        assert_eq!(run_sub(&cfg, &a, sub, &[]), 0, "{sub}");
        assert_eq!(run_sub(&cfg, &b, sub, &["--threads", "1"]), 0, "{sub}");
        for ext in ["csv", "json"] {
            let name = format!("{sub}.{ext}");
            let x = fs::read(a.join(&name)).unwrap();
            let y = fs::read(b.join(&name)).unwrap();
            assert!(x == y, "{name} differs between runs");
        }
        let csv = fs::read_to_string(a.join(format!("{sub}.csv"))).unwrap();
        assert!(csv.starts_with("# check: "), "{sub}");
    }
}

#[test]
fn flat_kernel_sweep_has_no_violations() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "k.toml", "[curve]\nkind = \"flat\"\n");
    let out = dir.path().join("out");
    assert_eq!(run_sub(&cfg, &out, "verify-kernel", &["--samples", "100000"]), 0);
    let csv = fs::read_to_string(out.join("verify-kernel.csv")).unwrap();
    assert_eq!(data_rows(&csv), 0);
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("verify-kernel.json")).unwrap()).unwrap();
    assert_eq!(json["pass"], true);
    assert_eq!(json["report"][0]["samples"], 100000);
}

#[test]
fn missing_grid_step_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "m.toml", "[grid]\norigin = 0.0\ncount = 5\n");
    let out = dir.path().join("out");
    let o = Command::new(BIN)
        .args(["--config", cfg.to_str().unwrap(), "--out-dir", out.to_str().unwrap(), "bmo-norm"])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("step") && err.contains("line 1"), "{err}");
}

#[test]
fn constant_symbol_is_rejected_by_lemma41() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.toml", "[symbol]\nkind = \"constant\"\nvalue = 2.0\n");
    assert_eq!(run_sub(&cfg, &dir.path().join("out"), "lemma41", &[]), 2);
}

#[test]
fn lemma41_reads_a_sampled_symbol() {
    let dir = tempfile::tempdir().unwrap();
    let h = 1.0 / 64.0;
    let mut csv = String::from("x,re,im\n");
    for i in -8200..=8200 {
        let x = (i as f64 + 0.5) * h;
        csv.push_str(&format!("{x},{},0\n", x.signum()));
    }
    fs::write(dir.path().join("b.csv"), csv).unwrap();
    let cfg = write_config(dir.path(), "e.toml", "");
    let b = dir.path().join("b.csv");
    let code = run_sub(
        &cfg,
        &dir.path().join("out"),
        "lemma41",
        &["--b", b.to_str().unwrap(), "--interval", "0,1", "--p", "2", "--k-ladder", "3..5"],
    );
    assert_eq!(code, 0);
    let rep = fs::read_to_string(dir.path().join("out/lemma41.csv")).unwrap();
    assert_eq!(data_rows(&rep), 6);
}

#[test]
fn violated_bound_exits_one() {
    // A jump of height 1000 at x = 40 lands in the k = 5 shell only, so the
    // upper ratios spread far beyond the allowed factor.
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "j.toml",
        "[symbol]\nkind = \"piecewise-constant\"\nbreaks = [0.0, 40.0]\nvalues = [-1.0, 1.0, 1000.0]\n[lemma41]\nk_ladder = [3, 4, 5]\npoints_per_annulus = 64\n",
    );
    let out = dir.path().join("out");
    assert_eq!(run_sub(&cfg, &out, "lemma41", &[]), 1);
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("lemma41.json")).unwrap()).unwrap();
    assert_eq!(json["pass"], false);
    assert!(json["report"]["ladder"]["upper_spread"].as_f64().unwrap() > 10.0);
}

#[test]
fn flags_override_the_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "s.toml", "seed = 3\n[verify_kernel]\nsamples = 10\n");
    let out = dir.path().join("out");
    assert_eq!(run_sub(&cfg, &out, "verify-kernel", &[]), 0);
    let a = fs::read_to_string(out.join("verify-kernel.json")).unwrap();
    assert!(a.contains("\"seed\": 3"));
    let args = ["--config", cfg.to_str().unwrap(), "--seed", "9", "--out-dir", out.to_str().unwrap(), "verify-kernel"];
    assert_eq!(run(&args), 0);
    let b = fs::read_to_string(out.join("verify-kernel.json")).unwrap();
    assert!(b.contains("\"seed\": 9"));
    assert_ne!(a, b);
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(run(&["no-such-command"]), 2);
    assert_eq!(run(&["witness", "--case", "tiny"]), 2);
    assert_eq!(run(&["--help"]), 0);
}

use emchan::capacity::{multi_user_capacity, MultiUserScenario, Transmitter};
use emchan::cli::{run, Command, RunOutput};
use emchan::config::Scenario;
use emchan::swf::{Geometry, Medium, RadiationOperator};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::Command as Process;

const SCENARIO: &str = r#"
seed = 21

[geometry]
r_t = "1λ"
r_r = "5λ"
distance = "20λ"

[users]
count = 2

[environment]
sigma_ds = 0.02
sigma_as = 0.02
sigma_es = 0.02

[power]
dbm = [0.0, 20.0, 40.0]

[stats]
ensemble_size = 6
with_scattering = true
t_refs = [0.0]
lags_ms = [0.0, 2.0]
offsets_wavelengths = [0.0, 0.5]

[capacity]
ensemble_size = 5
with_scattering = true
"#;

fn scenario(dir: &Path, text: &str) -> PathBuf {
    let p = dir.join("scenario.toml");
    std::fs::write(&p, text).unwrap();
    p
}

fn go(cmd: Command, config: &Path, overrides: &[&str], out: &Path) -> emchan::Result<RunOutput> {
    let ov: Vec<String> = overrides.iter().map(|s| s.to_string()).collect();
    run(&cmd, config, &ov, Some(out))
}

/// Data rows of a result table, comment lines and header dropped.
fn rows(path: &Path) -> Vec<Vec<String>> {
    let mut rd = csv::ReaderBuilder::new().comment(Some(b'#')).from_path(path).unwrap();
    rd.records()
        .map(|r| r.unwrap().iter().map(str::to_string).collect())
        .collect()
}

fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().to_string_lossy().into_owned(),
                std::fs::read(e.path()).unwrap(),
            )
        })
        .collect()
}

#[test]
fn scene_dump_reproduces_an_ensemble_member() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = scenario(dir.path(), SCENARIO);
    let ens = dir.path().join("ensemble");
    go(Command::CapacityMu { scene: None }, &cfg, &[], &ens).unwrap();
    let dump = dir.path().join("dump");
    go(Command::SceneDump { index: 3 }, &cfg, &[], &dump).unwrap();
    let single = dir.path().join("single");
    go(
        Command::CapacityMu {
            scene: Some(dump.join("scene-3.json")),
        },
        &cfg,
        &[],
        &single,
    )
    .unwrap();
    let member: Vec<String> = rows(&ens.join("capacity-mu-samples.csv"))
        .into_iter()
        .filter(|r| r[0] == "3")
        .map(|r| r[2].clone())
        .collect();
    let from_scene: Vec<String> = rows(&single.join("capacity-mu.csv"))
        .into_iter()
        .map(|r| r[2].clone())
        .collect();
    assert_eq!(member.len(), 3);
    assert_eq!(member, from_scene);
}

#[test]
fn scene_with_wrong_user_count_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = scenario(dir.path(), SCENARIO);
    let dump = dir.path().join("dump");
    go(Command::SceneDump { index: 0 }, &cfg, &[], &dump).unwrap();
    let e = go(
        Command::CapacityMu {
            scene: Some(dump.join("scene-0.json")),
        },
        &cfg,
        &["users.count=3"],
        &dir.path().join("x"),
    )
    .unwrap_err();
    assert!(e.to_string().contains("users"), "{e}");
}

#[test]
fn output_does_not_depend_on_thread_count() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = scenario(dir.path(), SCENARIO);
    let mut seen = Vec::new();
    for threads in [1usize, 3] {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        let out = dir.path().join(format!("t{threads}"));
        pool.install(|| {
            go(Command::CapacityMu { scene: None }, &cfg, &[], &out).unwrap();
            go(Command::Acf, &cfg, &[], &out).unwrap();
            go(Command::Ccf, &cfg, &[], &out).unwrap();
        });
        seen.push(snapshot(&out));
    }
    assert!(seen[0].len() >= 6);
    assert_eq!(seen[0], seen[1]);
}

#[test]
fn standard_error_shrinks_as_inverse_root_n() {
    let m = Medium::vacuum(30e9);
    let l = m.wavelength();
    let g = Geometry {
        r_t: l,
        r_r: 5.0 * l,
        distance: 20.0 * l,
    };
    let op = RadiationOperator::new(g, m, None).unwrap();
    let sc = MultiUserScenario::new(m, g, 2);
    let tx = Transmitter::modes(op, 6).unwrap();
    let scaled: Vec<f64> = [50usize, 200, 800]
        .iter()
        .map(|&n| {
            let rep = multi_user_capacity(&sc, &tx, &[-20.0], n, 7, false).unwrap();
            rep.stderr.unwrap()[0] * (n as f64).sqrt()
        })
        .collect();
    for s in &scaled[..2] {
        let rel = (s - scaled[2]).abs() / scaled[2];
        assert!(rel < 0.25, "{scaled:?}");
    }
}

#[test]
fn validate_reports_geometry_and_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = scenario(dir.path(), "[users]\ncount = 2\n");
    let rep = go(Command::Validate, &cfg, &[], &dir.path().join("v"))
        .unwrap()
        .report
        .unwrap();
    assert!(rep.starts_with("scenario ok"));
    assert!(rep.contains("flag: seed not set; default 1 used"), "{rep}");
    assert!(rep.contains("svd order: P = 6 for K = 2 users"), "{rep}");
    // the default scatterer is too large for 16 basis functions
    assert!(rep.contains("flag: single-scatterer held-out residual"), "{rep}");
    let rep = go(
        Command::Validate,
        &cfg,
        &["seed=4", "environment.radius=0.0025", "mom.basis_count=48"],
        &dir.path().join("v"),
    )
    .unwrap()
    .report
    .unwrap();
    assert!(rep.contains("seed: 4") && rep.contains("mom residual:"), "{rep}");
    assert!(!dir.path().join("v").exists(), "validate must not write files");
}

#[test]
fn overlapping_balls_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = scenario(
        dir.path(),
        "[geometry]\nr_t = \"2λ\"\nr_r = \"3λ\"\ndistance = \"4λ\"\n",
    );
    let e = go(Command::Validate, &cfg, &[], dir.path()).unwrap_err();
    assert!(
        e.to_string().contains("geometry") || e.to_string().contains("overlap"),
        "{e}"
    );
}

#[test]
fn unknown_keys_are_rejected() {
    assert!(Scenario::from_toml("[users]\ncount = 2\ncolour = 1\n", &[]).is_err());
    assert!(Scenario::from_toml("[nonsense]\nx = 1\n", &[]).is_err());
    assert!(Scenario::from_toml("", &["mom.basis_cnt=4".into()]).is_err());
    assert!(Scenario::from_toml("", &["mom.basis_count=4".into()]).is_ok());
}

#[test]
fn manifest_lists_outputs_and_seed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = scenario(dir.path(), SCENARIO);
    let out = dir.path().join("o");
    let files = go(Command::Dof, &cfg, &[], &out).unwrap().files;
    let manifest = files
        .iter()
        .find(|f| f.to_string_lossy().ends_with("dof.manifest.json"))
        .unwrap();
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(manifest).unwrap()).unwrap();
    assert_eq!(v["seed"], 21);
    assert_eq!(v["subcommand"], "dof");
    let outputs: Vec<&str> = v["outputs"]
        .as_array()
        .unwrap()
        .iter()
        .map(|x| x.as_str().unwrap())
        .collect();
    assert!(
        outputs.contains(&"dof.csv") && outputs.contains(&"singular-values.csv"),
        "{outputs:?}"
    );
    let text = std::fs::read_to_string(out.join("dof.csv")).unwrap();
    assert!(text.lines().next().unwrap().starts_with("# "));
}

#[test]
fn binary_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = scenario(dir.path(), SCENARIO);
    let bin = env!("CARGO_BIN_EXE_emchan");
    let ok = Process::new(bin).args(["validate", "-c"]).arg(&cfg).output().unwrap();
    assert!(ok.status.success());
    assert!(String::from_utf8_lossy(&ok.stdout).contains("scenario ok"));
    let bad = Process::new(bin)
        .args(["validate", "-c"])
        .arg(&cfg)
        .args(["--set", "users.cout=3"])
        .output()
        .unwrap();
    assert!(!bad.status.success());
    assert!(String::from_utf8_lossy(&bad.stderr).contains("error"));
    let threads = Process::new(bin)
        .env("EMCHAN_THREADS", "zero")
        .args(["validate", "-c"])
        .arg(&cfg)
        .output()
        .unwrap();
    assert_eq!(threads.status.code(), Some(2));
}

#[test]
fn shipped_configs_validate() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut n = 0;
    for e in std::fs::read_dir(&dir).unwrap() {
        let p = e.unwrap().path();
        if p.extension().is_some_and(|x| x == "toml") {
            let s = Scenario::load(&p, &[]).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
            let r = s.resolve().unwrap_or_else(|e| panic!("{}: {e}", p.display()));
            assert!(!r.seed_defaulted, "{} relies on the default seed", p.display());
            n += 1;
        }
    }
    assert!(n >= 6);
}

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use llp_core::sequence::{assemble_trial, label_stimuli, SymbolGrid, Trial, TrialDesign};
use llp_core::signal::io::{write_markers, write_recording};
use llp_core::signal::{ContinuousRecording, Marker, DEFAULT_CHANNELS};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tempfile::TempDir;

fn llp(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_llp"))
        .args(args)
        .arg("--out")
        .arg(dir)
        .env_remove("LLP_OUT_DIR")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

const SIM_CONFIG: &str = r#"
[session]
sentence = "LLP"

[model]
snr_target = 0.9
dim = 20
"#;

#[test]
fn naf_for_the_speller_matrix() {
    let dir = TempDir::new().unwrap();
    let o = llp(dir.path(), &["naf"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("groups: 2"));
    assert!(text.contains("NAF: 38.30"));
    assert!(text.contains("[3.37, -2.37; -0.42, 1.42]"));
}

#[test]
fn rank_deficient_matrix_exits_2() {
    let dir = TempDir::new().unwrap();
    let o = llp(dir.path(), &["naf", "--matrix", "[[0.5,0.5],[0.5,0.5]]"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("error:"));
}

#[test]
fn gen_sequences_is_deterministic() {
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    for dir in [&a, &b] {
        let o = llp(dir.path(), &["gen-sequences", "--seed", "11", "--count", "5"]);
        assert!(o.status.success(), "{}", stderr(&o));
        assert!(stdout(&o).contains("trials: 5, valid: 5, violations: 0"));
    }
    let ta = fs::read(a.path().join("trials.json")).unwrap();
    assert_eq!(ta, fs::read(b.path().join("trials.json")).unwrap());
    let trials = Trial::list_from_json(std::str::from_utf8(&ta).unwrap()).unwrap();
    assert_eq!(trials.len(), 5);
    assert!(trials.iter().all(|t| t.len() == 68));
}

#[test]
fn infeasible_design_exits_3() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        dir.path(),
        "design.toml",
        "[design]\nhighlight_size = 12\n[[design.sequence]]\nlength = 6\nappearances = 4\ngroup = 1\n",
    );
    let o = llp(dir.path(), &["--config", &cfg, "gen-sequences"]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
}

#[test]
fn simulate_without_snr_target_names_the_field() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "c.toml", "[session]\nseeds = 1\n");
    let o = llp(dir.path(), &["--config", &cfg, "simulate"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("model.snr_target"), "{}", stderr(&o));
}

#[test]
fn exported_session_replays_identically() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "c.toml", SIM_CONFIG);
    let o = llp(dir.path(), &["--config", &cfg, "--seeds", "1", "--seed", "4", "simulate", "--export"]);
    assert!(o.status.success(), "{}", stderr(&o));
    for f in ["model.json", "sessions.json", "sessions.csv", "ramp_up.csv", "summary.csv"] {
        assert!(dir.path().join(f).exists(), "missing {f}");
    }
    let features = dir.path().join("export_features.csv");
    let trials = dir.path().join("export_trials.json");
    let eval_dir = dir.path().join("eval");
    let o = llp(
        &eval_dir,
        &["--config", &cfg, "evaluate", "--features", features.to_str().unwrap(), "--trials", trials.to_str().unwrap()],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("supervised CV AUC: 0."));

    let sim = fs::read_to_string(dir.path().join("export_decisions.csv")).unwrap();
    let replay = fs::read_to_string(eval_dir.join("replay.csv")).unwrap();
    let (sim, replay): (Vec<&str>, Vec<&str>) = (sim.lines().collect(), replay.lines().collect());
    assert_eq!(sim.len(), 4);
    assert_eq!(sim[0], replay[0]);
    // The first character is a guess in the simulator and undecided in the replay.
    assert!(replay[1].starts_with("0,NA,"));
    let tail = |l: &str| l.split(',').skip(2).map(str::to_string).collect::<Vec<_>>();
    assert_eq!(tail(sim[1]), tail(replay[1]));
    assert_eq!(&sim[2..], &replay[2..]);
}

#[test]
fn withheld_labels_skip_supervised_metrics() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "c.toml", SIM_CONFIG);
    let o = llp(dir.path(), &["--config", &cfg, "--seeds", "1", "simulate", "--export", "-q"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).is_empty());
    let text = fs::read_to_string(dir.path().join("export_features.csv")).unwrap();
    let stripped: String = text
        .lines()
        .enumerate()
        .map(|(i, l)| {
            if i == 0 {
                return format!("{l}\n");
            }
            let mut f: Vec<&str> = l.split(',').collect();
            f[2] = "NA";
            format!("{}\n", f.join(","))
        })
        .collect();
    let path = write(dir.path(), "unlabelled.csv", &stripped);
    let trials = dir.path().join("export_trials.json");
    let o = llp(dir.path(), &["evaluate", "--features", &path, "--trials", trials.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("skipped (no labels)"));
    let eval: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("evaluation.json")).unwrap()).unwrap();
    assert_eq!(eval["labelled"], false);
    assert!(eval["supervised_cv_auc"].is_null());
    assert!(eval["replay"]["posthoc"].is_array());
}

#[test]
fn malformed_feature_row_reports_the_line() {
    let dir = TempDir::new().unwrap();
    let path = write(dir.path(), "bad.csv", "trial,group,label,symbol,f0,f1\n0,1,+1,3,0.5,0.1\n0,2,-1,3,abc,0.2\n");
    let o = llp(dir.path(), &["evaluate", "--features", &path]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 3"), "{}", stderr(&o));
}

#[test]
fn naf_sweep_single_matrix_and_empty_list() {
    let dir = TempDir::new().unwrap();
    let cfg =
        write(dir.path(), "c.toml", "[model]\nsnr_target = 0.8\ndim = 10\n[sweep]\nepochs = 300\ntest_epochs = 200\n");
    let o = llp(dir.path(), &["--config", &cfg, "--seeds", "2", "naf-sweep", "--matrix", "[[[0.8,0.2],[0.1,0.9]]]"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(dir.path().join("naf_sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2, "{csv}");

    let o = llp(dir.path(), &["--config", &cfg, "naf-sweep", "--matrix", "[]"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("empty"), "{}", stderr(&o));
}

#[test]
fn recording_input_yields_epoch_features() {
    let dir = TempDir::new().unwrap();
    let grid = SymbolGrid::speller();
    let design = TrialDesign::speller();
    let attended = grid.selectable()[2];
    let trial = assemble_trial(&grid, &design, 5).unwrap();
    let labels = label_stimuli(&trial, &grid, attended).unwrap();
    let (start, soa) = (1000, 120);
    let len = start + soa * trial.len() + 1500;
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut samples: Vec<Vec<f64>> =
        (0..DEFAULT_CHANNELS.len()).map(|_| (0..len).map(|_| rng.gen_range(-2.0..2.0)).collect()).collect();
    let mut markers = Vec::new();
    for (k, (s, l)) in trial.stimuli.iter().zip(&labels).enumerate() {
        let index = start + soa * k;
        if l.is_target() {
            // slow positive deflection about 300-500 ms after the target onset
            for ch in samples.iter_mut() {
                for (t, v) in ch[index + 300..index + 500].iter_mut().enumerate() {
                    *v += 5.0 * (std::f64::consts::PI * t as f64 / 200.0).sin();
                }
            }
        }
        markers.push(Marker { index, symbol: Some(attended), group: s.group, label: Some(*l) });
    }
    let names = DEFAULT_CHANNELS.iter().map(|s| s.to_string()).collect();
    let rec = ContinuousRecording::new(samples, 1000.0, names, markers.clone()).unwrap();
    let mut buf = Vec::new();
    write_recording(&mut buf, &rec).unwrap();
    let rp = write(dir.path(), "rec.csv", &String::from_utf8(buf).unwrap());
    let mut buf = Vec::new();
    write_markers(&mut buf, &markers).unwrap();
    let mp = write(dir.path(), "markers.csv", &String::from_utf8(buf).unwrap());

    let o = llp(dir.path(), &["evaluate", "--recording", &rp, "--markers", &mp]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("epochs: 68, features: 174"), "{}", stdout(&o));
    let eval: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("evaluation.json")).unwrap()).unwrap();
    assert!(eval["peaks"].is_array());
    assert!(eval["signed_r2"].is_array());
}
